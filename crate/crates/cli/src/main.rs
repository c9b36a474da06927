use clap::Parser;

fn main() {
    let cli = stgcn_nas_cli::Cli::parse();
    let code = stgcn_nas_cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
