//! Writes a handful of legacy VTK snapshots, then recovers the surface
//! displacement series from them the same way the `extract` command does.

use rominv::vtk::{build_series, parse_legacy_vtk, surface_displacement, Grid, SnapshotSet, VectorArray};

fn snapshot(step: usize) -> Grid {
    let points = vec![[0.0, 0.0, 0.0], [2000.0, 0.0, 0.0], [0.0, 500.0, 0.0], [2000.0, 500.0, 0.0]];
    let lift = 1e-3 * step as f64;
    let data = points.iter().map(|p| [0.3 * lift, lift * (1.0 + p[1] / 500.0), 0.0]).collect();
    Grid { points, vectors: vec![VectorArray { name: "displacement".into(), data }] }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("rominv-vtk-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    for step in 0..6 {
        std::fs::write(dir.join(format!("solution_{step}.vtk")), snapshot(step).to_legacy_vtk())?;
    }

    let text = std::fs::read(dir.join("solution_3.vtk"))?;
    let grid = parse_legacy_vtk(&text)?;
    let surface = surface_displacement(&grid, "displacement")?;
    println!(
        "snapshot 3: {} points, surface point {:?} moves {:.6} m",
        grid.points.len(),
        surface.position,
        surface.magnitude
    );

    let set = SnapshotSet::from_dir(&dir, "displacement", 10.0)?;
    let series = build_series(&set)?;
    for (i, v) in series.values().iter().enumerate() {
        println!("t = {:>4} d  |u| = {v:.6} m", series.time(i));
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
