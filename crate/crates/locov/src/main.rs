fn main() {
    std::process::exit(locov::cli::run());
}
