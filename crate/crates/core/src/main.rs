fn main() {
    std::process::exit(cla_core::cli::run(std::env::args_os()));
}
