fn main() -> std::process::ExitCode {
    promptcache::cli::main()
}
