fn main() {
    std::process::exit(resonance_lab::cli::run_from(std::env::args_os()));
}
