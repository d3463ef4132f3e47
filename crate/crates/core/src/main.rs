fn main() {
    std::process::exit(attractor_scout::cli::cli(std::env::args_os()));
}
