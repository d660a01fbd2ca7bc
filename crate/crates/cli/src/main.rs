fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let code = sovc_cli::run(std::env::args().collect(), std::env::vars().collect(), &mut std::io::stdout());
    std::process::exit(code);
}
