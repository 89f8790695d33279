fn main() {
    std::process::exit(crackforge::cli::run());
}
