fn main() {
    std::process::exit(berkson::cli::run());
}
