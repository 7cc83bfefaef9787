//! Mesh file parsing: a minimal subset of the Gmsh MSH 2.2 ASCII format and
//! an in-house plain-text format (counts, vertex lines, element lines).

use super::BoundaryTag;
use crate::error::Error;
use std::collections::HashMap;

type ParsedMesh = (
    Vec<(f64, f64)>,
    Vec<[usize; 3]>,
    HashMap<(usize, usize), BoundaryTag>,
);

fn parse_err(msg: impl Into<String>) -> Error {
    Error::MeshParse(msg.into())
}

/// Plain-text format:
/// ```text
/// # comment
/// nv ne
/// x y          (nv lines)
/// a b c        (ne lines, 0-based vertex indices)
/// ```
pub fn parse_plain(text: &str) -> Result<ParsedMesh, Error> {
    let mut lines = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| parse_err("empty mesh file"))?;
    let mut it = header.split_whitespace();
    let nv: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err("bad vertex count"))?;
    let ne: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err("bad element count"))?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| parse_err(format!("missing vertex line {i}")))?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(format!("bad x on vertex line {i}")))?;
        let y: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(format!("bad y on vertex line {i}")))?;
        vertices.push((x, y));
    }
    let mut elements = Vec::with_capacity(ne);
    for i in 0..ne {
        let line = lines
            .next()
            .ok_or_else(|| parse_err(format!("missing element line {i}")))?;
        let mut tri = [0usize; 3];
        let mut it = line.split_whitespace();
        for v in tri.iter_mut() {
            *v = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(format!("bad element line {i}")))?;
        }
        elements.push(tri);
    }
    Ok((vertices, elements, HashMap::new()))
}

/// Serialize to the plain-text format with full f64 round-trip precision.
pub fn write_plain(vertices: &[(f64, f64)], elements: &[[usize; 3]]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", vertices.len(), elements.len()));
    for &(x, y) in vertices {
        out.push_str(&format!("{x:.17e} {y:.17e}\n"));
    }
    for tri in elements {
        out.push_str(&format!("{} {} {}\n", tri[0], tri[1], tri[2]));
    }
    out
}

/// Minimal Gmsh MSH 2.2 ASCII subset: $Nodes, 2D triangle elements (type 2),
/// and boundary lines (type 1) carrying physical tags. $PhysicalNames maps
/// physical ids to the named boundary groups.
pub fn parse_msh22(text: &str) -> Result<ParsedMesh, Error> {
    let mut lines = text.lines().map(|l| l.trim());
    let mut phys_names: HashMap<i64, BoundaryTag> = HashMap::new();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut vertices: Vec<(f64, f64)> = Vec::new();
    let mut elements: Vec<[usize; 3]> = Vec::new();
    let mut tagged_lines: Vec<(i64, usize, usize)> = Vec::new();

    while let Some(line) = lines.next() {
        match line {
            "$MeshFormat" => {
                let fmt = lines.next().ok_or_else(|| parse_err("truncated $MeshFormat"))?;
                let ver = fmt.split_whitespace().next().unwrap_or("");
                if !ver.starts_with("2.2") {
                    return Err(parse_err(format!("unsupported MSH version {ver} (need 2.2)")));
                }
            }
            "$PhysicalNames" => {
                let n: usize = lines
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err("bad $PhysicalNames count"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| parse_err("truncated $PhysicalNames"))?;
                    let mut it = l.split_whitespace();
                    let _dim: i64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("bad physical name line"))?;
                    let id: i64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("bad physical name id"))?;
                    let name = l
                        .splitn(3, char::is_whitespace)
                        .nth(2)
                        .unwrap_or("")
                        .trim_matches('"');
                    if let Some(tag) = BoundaryTag::parse(name) {
                        phys_names.insert(id, tag);
                    }
                }
            }
            "$Nodes" => {
                let n: usize = lines
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err("bad $Nodes count"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| parse_err("truncated $Nodes"))?;
                    let mut it = l.split_whitespace();
                    let id: i64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("bad node id"))?;
                    let x: f64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("bad node x"))?;
                    let y: f64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("bad node y"))?;
                    node_ids.insert(id, vertices.len());
                    vertices.push((x, y));
                }
            }
            "$Elements" => {
                let n: usize = lines
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err("bad $Elements count"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| parse_err("truncated $Elements"))?;
                    let nums: Vec<i64> = l
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| parse_err("bad element entry")))
                        .collect::<Result<_, _>>()?;
                    if nums.len() < 3 {
                        return Err(parse_err("short element line"));
                    }
                    let etype = nums[1];
                    let ntags = nums[2] as usize;
                    let node_start = 3 + ntags;
                    let phys = if ntags > 0 { nums[3] } else { 0 };
                    match etype {
                        2 => {
                            if nums.len() < node_start + 3 {
                                return Err(parse_err("triangle with missing nodes"));
                            }
                            let mut tri = [0usize; 3];
                            for (i, t) in tri.iter_mut().enumerate() {
                                *t = *node_ids
                                    .get(&nums[node_start + i])
                                    .ok_or_else(|| parse_err("triangle references unknown node"))?;
                            }
                            elements.push(tri);
                        }
                        1 => {
                            if nums.len() < node_start + 2 {
                                return Err(parse_err("line element with missing nodes"));
                            }
                            let a = *node_ids
                                .get(&nums[node_start])
                                .ok_or_else(|| parse_err("line references unknown node"))?;
                            let b = *node_ids
                                .get(&nums[node_start + 1])
                                .ok_or_else(|| parse_err("line references unknown node"))?;
                            tagged_lines.push((phys, a, b));
                        }
                        _ => {} // points and other element types are ignored
                    }
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() || elements.is_empty() {
        return Err(parse_err("no nodes or no triangles found"));
    }
    let mut edge_tags = HashMap::new();
    for (phys, a, b) in tagged_lines {
        if let Some(&tag) = phys_names.get(&phys) {
            edge_tags.insert((a.min(b), a.max(b)), tag);
        }
    }
    Ok((vertices, elements, edge_tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{load_mesh, validate_mesh, Mesh, PeriodicSpec};

    #[test]
    fn plain_roundtrip_bit_exact() {
        let vertices = vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0 / 3.0, 1.0 + 1e-13),
            (0.1234567890123456789, 1.0),
        ];
        let elements = vec![[0, 1, 2], [0, 2, 3]];
        let text = write_plain(&vertices, &elements);
        let (v2, e2, _) = parse_plain(&text).unwrap();
        assert_eq!(e2, elements);
        for (a, b) in vertices.iter().zip(v2.iter()) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn msh22_with_boundary_tags() {
        let text = r#"$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 10 "wall"
1 11 "periodic-x"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
4
1 2 2 10 1 1 2 3
2 2 2 10 1 1 3 4
3 1 2 10 99 1 2
4 1 2 11 99 2 3
$EndElements
"#;
        let (v, e, tags) = parse_msh22(text).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(e.len(), 2);
        assert_eq!(tags.get(&(0, 1)), Some(&BoundaryTag::Wall));
        assert_eq!(tags.get(&(1, 2)), Some(&BoundaryTag::PeriodicX));
        let mesh = Mesh::build(v, e, &tags, PeriodicSpec::default()).unwrap();
        assert!(validate_mesh(&mesh).all_pass());
    }

    #[test]
    fn loader_rejects_garbage() {
        let dir = std::env::temp_dir().join("gndg_fmt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.txt");
        std::fs::write(&p, "not a mesh").unwrap();
        assert!(load_mesh(&p, PeriodicSpec::default()).is_err());
    }
}
