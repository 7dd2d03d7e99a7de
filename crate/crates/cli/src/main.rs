fn main() {
    std::process::exit(dnas_cli::main_with(std::env::args_os()));
}
