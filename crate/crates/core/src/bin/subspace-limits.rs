fn main() {
    std::process::exit(subspace_limits::cli::run(std::env::args_os()));
}
