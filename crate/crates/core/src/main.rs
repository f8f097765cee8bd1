fn main() {
    std::process::exit(focus_diffusion::cli::main_with_args(std::env::args_os()));
}
