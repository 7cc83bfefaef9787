//! Output writers: VTK legacy snapshots, gauge CSV files, run summaries,
//! and binary state checkpoints.

use crate::basis::ReferenceElement;
use crate::error::Error;
use crate::field::{State, VectorField};
use crate::mesh::Mesh;
use std::io::Write;
use std::path::Path;

/// Legacy ASCII VTK unstructured-grid snapshot: each element is emitted as
/// its nodal sub-triangulation with point data (eta, h, qx, qy, optionally
/// D_c) and cell data (troubled flag).
#[allow(clippy::too_many_arguments)]
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    re: &ReferenceElement,
    state: &State,
    b: &crate::field::ScalarField,
    d_c: Option<&VectorField>,
    troubled: Option<&[bool]>,
    t: f64,
) -> Result<(), Error> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let ne = mesh.n_elems();
    let n = re.n_nodes;
    writeln!(f, "# vtk DataFile Version 3.0")?;
    writeln!(f, "free surface snapshot t = {t:.9e}")?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(f, "POINTS {} double", ne * n)?;
    for e in 0..ne {
        for &p in &re.nodes {
            let (x, y) = mesh.map_ref_to_phys(e, p);
            writeln!(f, "{x:.9e} {y:.9e} 0.0")?;
        }
    }
    // sub-triangulation of the nodal lattice
    let k = re.k;
    let mut idx = std::collections::HashMap::new();
    for (i, &(r, c)) in re.node_lattice.iter().enumerate() {
        idx.insert((r, c), i);
    }
    let mut sub = Vec::new();
    for r in 0..k {
        for c in 0..(k - r) {
            sub.push([idx[&(r, c)], idx[&(r, c + 1)], idx[&(r + 1, c)]]);
            if c + 1 <= k - r - 1 {
                sub.push([idx[&(r, c + 1)], idx[&(r + 1, c + 1)], idx[&(r + 1, c)]]);
            }
        }
    }
    let ncell = ne * sub.len();
    writeln!(f, "CELLS {} {}", ncell, 4 * ncell)?;
    for e in 0..ne {
        for tri in &sub {
            writeln!(f, "3 {} {} {}", e * n + tri[0], e * n + tri[1], e * n + tri[2])?;
        }
    }
    writeln!(f, "CELL_TYPES {ncell}")?;
    for _ in 0..ncell {
        writeln!(f, "5")?;
    }
    writeln!(f, "POINT_DATA {}", ne * n)?;
    let scalar = |f: &mut std::io::BufWriter<std::fs::File>,
                  name: &str,
                  data: &dyn Fn(usize) -> f64|
     -> std::io::Result<()> {
        writeln!(f, "SCALARS {name} double 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for i in 0..ne * n {
            writeln!(f, "{:.9e}", data(i))?;
        }
        Ok(())
    };
    scalar(&mut f, "eta", &|i| state.eta.data[i])?;
    scalar(&mut f, "h", &|i| state.eta.data[i] - b.data[i])?;
    scalar(&mut f, "qx", &|i| state.qx.data[i])?;
    scalar(&mut f, "qy", &|i| state.qy.data[i])?;
    scalar(&mut f, "b", &|i| b.data[i])?;
    if let Some(dc) = d_c {
        scalar(&mut f, "dcx", &|i| dc.x.data[i])?;
        scalar(&mut f, "dcy", &|i| dc.y.data[i])?;
    }
    if let Some(tr) = troubled {
        writeln!(f, "CELL_DATA {ncell}")?;
        writeln!(f, "SCALARS troubled int 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for e in 0..ne {
            for _ in 0..sub.len() {
                writeln!(f, "{}", if tr[e] { 1 } else { 0 })?;
            }
        }
    }
    Ok(())
}

/// Gauge CSV: t, eta, qx, qy.
pub fn write_gauge_csv(path: &Path, series: &super::gauges::GaugeSeries) -> Result<(), Error> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,eta,qx,qy")?;
    for i in 0..series.t.len() {
        writeln!(
            f,
            "{:.12e},{:.12e},{:.12e},{:.12e}",
            series.t[i], series.eta[i], series.qx[i], series.qy[i]
        )?;
    }
    Ok(())
}

/// Binary state checkpoint: magic, counts, time, then the three nodal
/// coefficient arrays in little-endian f64.
pub fn save_state(path: &Path, t: f64, state: &State) -> Result<(), Error> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(b"GNDGSTA1")?;
    f.write_all(&(state.n_elems() as u64).to_le_bytes())?;
    f.write_all(&(state.n_nodes() as u64).to_le_bytes())?;
    f.write_all(&t.to_le_bytes())?;
    for field in [&state.eta, &state.qx, &state.qy] {
        for v in &field.data {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_state(path: &Path) -> Result<(f64, State), Error> {
    let bytes = std::fs::read(path)?;
    let fail = |m: &str| Error::Config(format!("state file {}: {m}", path.display()));
    if bytes.len() < 32 || &bytes[0..8] != b"GNDGSTA1" {
        return Err(fail("bad header"));
    }
    let rd_u64 = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let ne = rd_u64(8) as usize;
    let nn = rd_u64(16) as usize;
    let t = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let need = 32 + 3 * ne * nn * 8;
    if bytes.len() != need {
        return Err(fail("truncated"));
    }
    let mut state = State::zeros(ne, nn);
    let mut off = 32;
    for field in [&mut state.eta, &mut state.qx, &mut state.qy] {
        for v in field.data.iter_mut() {
            *v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            off += 8;
        }
    }
    Ok((t, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::reference_element;
    use crate::mesh::{regular_mesh, PeriodicSpec};

    #[test]
    fn state_checkpoint_roundtrip_bitexact() {
        let dir = std::env::temp_dir().join("gndg_state_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("chk.bin");
        let mut s = State::zeros(3, 6);
        for (i, v) in s.eta.data.iter_mut().enumerate() {
            *v = (i as f64).sin() * 1e-3 + 1.0;
        }
        s.qx.data[7] = -0.1234567890123456789;
        save_state(&p, 12.3456789, &s).unwrap();
        let (t, s2) = load_state(&p).unwrap();
        assert_eq!(t.to_bits(), 12.3456789f64.to_bits());
        assert_eq!(s.eta.data, s2.eta.data);
        assert_eq!(s.qx.data, s2.qx.data);
        assert_eq!(s.qy.data, s2.qy.data);
    }

    #[test]
    fn vtk_writes_parseable_output() {
        let dir = std::env::temp_dir().join("gndg_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("snap.vtk");
        let mesh = regular_mesh(2, 2, 0.0, 1.0, 0.0, 1.0, PeriodicSpec::default()).unwrap();
        let re = reference_element(2).unwrap();
        let state = State::zeros(mesh.n_elems(), re.n_nodes);
        let b = crate::field::ScalarField::zeros(mesh.n_elems(), re.n_nodes);
        write_vtk(&p, &mesh, &re, &state, &b, None, None, 0.0).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(text.contains("POINTS 48 double")); // 8 elements x 6 nodes
        // P2 sub-triangulation: 4 cells per element
        assert!(text.contains("CELLS 32 128"));
    }
}
