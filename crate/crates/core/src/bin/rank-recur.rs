fn main() -> std::process::ExitCode {
    rank_recur::cli::main()
}
