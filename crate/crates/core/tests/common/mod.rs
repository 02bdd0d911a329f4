#![allow(dead_code)]

use std::path::PathBuf;

use rominv::vtk::{build_series, parse_file, surface_displacement, SnapshotSet, VtkError};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/vtk").join(rel)
}

/// Unwraps the file-context wrapper `parse_file` adds.
pub fn inner(e: VtkError) -> VtkError {
    match e {
        VtkError::InFile { source, .. } => *source,
        other => other,
    }
}

fn expect(name: &str, ok: bool, detail: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{name}: {detail}"))
    }
}

/// Checks every fixture in the corpus against its expected outcome and
/// returns one entry per fixture.
pub fn vtk_corpus() -> Vec<(String, Result<(), String>)> {
    let mut out = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| out.push((name.to_string(), r));

    let magnitude = |rel: &str| -> Result<(usize, f64, usize), String> {
        let g = parse_file(&fixture(rel)).map_err(|e| e.to_string())?;
        let s = surface_displacement(&g, "displacement").map_err(|e| e.to_string())?;
        Ok((g.points.len(), s.magnitude, s.ties))
    };

    record(
        "valid/one_point",
        magnitude("valid/one_point.vtk")
            .and_then(|(n, m, _)| expect("one_point", n == 1 && m == 5.0, format!("{n} points, magnitude {m}"))),
    );
    record(
        "valid/two_points",
        magnitude("valid/two_points.vtk")
            .and_then(|(n, m, _)| expect("two_points", n == 2 && m == 10.0, format!("{n} points, magnitude {m}"))),
    );
    record(
        "valid/mixed_sections",
        parse_file(&fixture("valid/mixed_sections.vtk")).map_err(|e| e.to_string()).and_then(|g| {
            let names: Vec<&str> = g.vectors.iter().map(|a| a.name.as_str()).collect();
            let s = surface_displacement(&g, "displacement").map_err(|e| e.to_string())?;
            expect(
                "mixed_sections",
                g.points.len() == 4
                    && names == ["displacement", "velocity"]
                    && g.points[2] == [0.0, 500.0, 0.0]
                    && s.index == 2
                    && (s.magnitude - 1e-3).abs() < 1e-15,
                format!("{} points, arrays {names:?}, selected {} with {}", g.points.len(), s.index, s.magnitude),
            )
        }),
    );
    record(
        "valid/tie",
        magnitude("valid/tie.vtk").and_then(|(n, m, ties)| {
            expect("tie", n == 3 && m == 0.5 && ties == 1, format!("magnitude {m}, ties {ties}"))
        }),
    );

    let err = |rel: &str| match parse_file(&fixture(rel)) {
        Ok(_) => None,
        Err(e) => Some(inner(e)),
    };
    let typed = |rel: &str, want: &str, ok: bool, got: Option<VtkError>| {
        expect(rel, ok, format!("expected {want}, got {got:?}"))
    };
    let e = err("malformed/bad_magic.vtk");
    record("malformed/bad_magic", typed("bad_magic", "BadMagic", matches!(e, Some(VtkError::BadMagic)), e));
    let e = err("malformed/binary.vtk");
    record("malformed/binary", typed("binary", "BinaryUnsupported", matches!(e, Some(VtkError::BinaryUnsupported)), e));
    let e = err("malformed/polydata.vtk");
    record(
        "malformed/polydata",
        typed("polydata", "UnknownDataset", matches!(&e, Some(VtkError::UnknownDataset(d)) if d == "POLYDATA"), e),
    );
    let e = err("malformed/truncated_points.vtk");
    record(
        "malformed/truncated_points",
        typed(
            "truncated_points",
            "TruncatedSection 6/3",
            matches!(e, Some(VtkError::TruncatedSection { expected: 6, found: 3, .. })),
            e,
        ),
    );
    let e = err("malformed/truncated_vectors.vtk");
    record(
        "malformed/truncated_vectors",
        typed(
            "truncated_vectors",
            "TruncatedSection 6/3",
            matches!(e, Some(VtkError::TruncatedSection { expected: 6, found: 3, .. })),
            e,
        ),
    );
    let surface_err = |rel: &str| {
        parse_file(&fixture(rel)).map_err(|e| e.to_string()).map(|g| surface_displacement(&g, "displacement").err())
    };
    record(
        "malformed/no_displacement",
        surface_err("malformed/no_displacement.vtk").and_then(|e| {
            expect(
                "no_displacement",
                matches!(&e, Some(VtkError::NoSuchArray(n)) if n == "displacement"),
                format!("{e:?}"),
            )
        }),
    );
    record(
        "malformed/no_corner",
        surface_err("malformed/no_corner.vtk")
            .and_then(|e| expect("no_corner", matches!(e, Some(VtkError::NoMatchingPoint)), format!("{e:?}"))),
    );

    record(
        "series",
        SnapshotSet::from_dir(&fixture("series"), "displacement", 1.0)
            .and_then(|set| build_series(&set))
            .map_err(|e| e.to_string())
            .and_then(|s| {
                expect(
                    "series",
                    s.values() == [1.0, 2.0, 3.0] && s.times() == [1.0, 2.0, 3.0],
                    format!("values {:?} at {:?}", s.values(), s.times()),
                )
            }),
    );
    record(
        "inconsistent",
        match SnapshotSet::from_dir(&fixture("inconsistent"), "displacement", 1.0).and_then(|set| build_series(&set)) {
            Err(VtkError::InconsistentSurfacePoint { index: 1, .. }) => Ok(()),
            other => Err(format!("inconsistent: expected InconsistentSurfacePoint at 1, got {other:?}")),
        },
    );
    out
}
