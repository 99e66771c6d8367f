fn main() {
    std::process::exit(imbaltext::cli::main());
}
