fn main() {
    std::process::exit(schurloc_cli::main_with(std::env::args_os()));
}
