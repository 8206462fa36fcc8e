//! Writes a graph in both text formats, reads it back and saves a JSON report.
//!
//!     cargo run --example file_io

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::eval::error_summary;
use rotsync::io::{load_dataset, load_orientations, save_dataset, save_orientations, GraphFormat};
use rotsync::pipeline::{run_pipeline, PipelineConfig};
use rotsync::report::{read_report, write_report, ReportFormat, SolveReport};
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let dir = std::env::temp_dir().join("rotsync_file_io");
    std::fs::create_dir_all(&dir).map_err(|e| rotsync::Error::InvalidParam(e.to_string()))?;
    let scene = synthesize(
        &SynthParams { n: 10, density: 0.6, noise_sigma_deg: 2.0, outlier_ratio: 0.0 },
        &mut ChaCha8Rng::seed_from_u64(4),
    )?;

    let plain = dir.join("graph.txt");
    let g2o = dir.join("graph.g2o");
    save_dataset(&scene.graph, None, &plain, GraphFormat::Plain)?;
    // g2o keeps vertices and edges in one file
    save_dataset(&scene.graph, Some(&scene.ground_truth), &g2o, GraphFormat::G2o)?;
    save_orientations(&scene.ground_truth, dir.join("gt.txt"), GraphFormat::Plain)?;

    let a = load_dataset(&plain, GraphFormat::Plain)?;
    let b = load_dataset(&g2o, GraphFormat::G2o)?;
    println!("plain: {} edges, g2o: {} edges, g2o orientations: {}", a.graph.num_edges(), b.graph.num_edges(), b.ground_truth.is_some());

    let gt = load_orientations(dir.join("gt.txt"), GraphFormat::Plain)?;
    let mut cfg = PipelineConfig::default();
    cfg.solver.depth_candidates = vec![2];
    let out = run_pipeline(&a.graph, &cfg)?;
    let metrics = error_summary(&out.orientations, &gt.orientations);
    let report = SolveReport::new(a.graph.n(), a.graph.num_edges(), &cfg, &out, Some(metrics), false);

    let path = dir.join("report.json");
    write_report(&report, &path, ReportFormat::Json)?;
    assert_eq!(read_report(&path)?, report);
    println!("{} -> {}", report.summary_line().unwrap_or_default(), path.display());
    Ok(())
}
