fn main() {
    let code = detform::cli::run(std::env::args_os());
    std::process::exit(code);
}
