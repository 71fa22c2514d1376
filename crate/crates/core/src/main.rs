fn main() {
    std::process::exit(sraal_core::cli::main());
}
