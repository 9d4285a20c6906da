//! Output-directory precedence. Kept in its own binary because it touches
//! the process environment.

use fracfold_harness::cli::Cli;
use clap::Parser;

#[test]
fn flag_beats_env_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "[output]\ndir = from-config\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    std::env::remove_var("FRACFOLD_OUT");
    let c = Cli::try_parse_from(["fracfold", "solve-ps", "--config", cfg]).unwrap();
    assert_eq!(c.common.resolve().unwrap().out.to_str(), Some("from-config"));

    std::env::set_var("FRACFOLD_OUT", "from-env");
    let c = Cli::try_parse_from(["fracfold", "solve-ps", "--config", cfg]).unwrap();
    assert_eq!(c.common.resolve().unwrap().out.to_str(), Some("from-env"));
    let c = Cli::try_parse_from(["fracfold", "solve-ps", "--config", cfg, "--out", "from-flag"]).unwrap();
    assert_eq!(c.common.resolve().unwrap().out.to_str(), Some("from-flag"));
    std::env::remove_var("FRACFOLD_OUT");
}
