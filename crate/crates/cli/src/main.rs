fn main() {
    std::process::exit(kgreason_cli::main_with_args());
}
