fn main() {
    std::process::exit(hsa::cli::run());
}
