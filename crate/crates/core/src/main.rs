fn main() {
    std::process::exit(laser_trng::cli::run(std::env::args_os()));
}
