fn main() {
    std::process::exit(motion_forge::cli::run(std::env::args_os()));
}
