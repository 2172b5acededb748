fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let status = protocompose_cli::run(&argv);
    std::process::exit(status.code);
}
