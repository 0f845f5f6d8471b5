fn main() {
    let code = pqbench::cli::run(std::env::args_os());
    std::process::exit(code);
}
