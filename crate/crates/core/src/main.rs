fn main() {
    std::process::exit(lane_emden::cli::args::main_with_args(std::env::args_os()));
}
