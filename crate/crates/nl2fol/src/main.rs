fn main() -> std::process::ExitCode {
    nl2fol::cli::main()
}
