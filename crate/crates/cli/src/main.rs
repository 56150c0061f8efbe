fn main() {
    std::process::exit(erasure_bc_cli::run(std::env::args_os()));
}
