fn main() {
    let code = qwk_cli::main_with_args(std::env::args().skip(1).collect());
    std::process::exit(code);
}
