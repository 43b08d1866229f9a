fn main() {
    let code = inducing_entropy::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
