fn main() {
    std::process::exit(nlicur::cli::main());
}
