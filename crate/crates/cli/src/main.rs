fn main() {
    std::process::exit(lqgvar_cli::run(std::env::args_os()));
}
