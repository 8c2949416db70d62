//! Full offline run over mock agents and synthetic footage:
//! sample -> annotate -> build-dataset -> toy-train -> evaluate.
//!
//!     cargo run --example end_to_end -- [clips] [out_dir]

use std::path::PathBuf;

use roadscene::annotation::TargetKind;
use roadscene::cli::{self, write_mock_workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let root = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("roadscene-e2e"));

    let cfg = write_mock_workspace(&root, n, 7)?;
    println!("workspace {}", root.display());

    let s = cli::cmd_sample(&cfg)?;
    println!("sampled {} clips ({} already present), {} frames", s.sampled, s.skipped, s.frames);

    let a = cli::cmd_annotate(&cfg)?;
    println!("annotated {}/{} clips, {} quarantined, {} provider calls", a.annotated, a.clips, a.quarantined, a.provider_calls);

    let d = cli::cmd_build_dataset(&cfg, TargetKind::Unified, false)?;
    println!("wrote {} SFT records to {}", d.records, cfg.dataset_path.display());

    let t = cli::cmd_toy_train(&cfg, &cfg.student.train_config())?;
    println!("toy student: vocab {}, {} parameters", t.vocab_size, t.parameters);
    for (e, loss) in t.report.trajectory().iter().enumerate() {
        println!("  epoch {e}: {loss:.4}");
    }

    let report = cli::cmd_evaluate(
        &cfg.student_dir.join(cli::STUDENT_OUTPUTS_FILE),
        &cfg.annotations_dir.join(cli::REFERENCES_FILE),
        "toy-student",
    )?;
    print!("\n{}", report.human);
    Ok(())
}
