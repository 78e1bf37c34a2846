//! Binary and CSV serialization of fields.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! u32            dim
//! u64 × dim      cells per axis
//! f64 × dim      box lengths
//! u32            components per node
//! u8             boundary (0 = periodic, 1 = no-slip box)
//! f64 × nodes × components   values, components innermost, x₁ fastest
//! ```

use std::io::{Read, Write};

use super::{Boundary, Field, FieldError, FieldKind, Grid};

fn kind_for(components: usize, dim: usize) -> Option<FieldKind> {
    [FieldKind::Scalar, FieldKind::Vector, FieldKind::Tensor]
        .into_iter()
        .find(|k| k.components(dim) == components)
}

pub fn write_binary<W: Write>(f: &Field, mut w: W) -> Result<(), FieldError> {
    let g = f.grid();
    let d = g.dim();
    w.write_all(&(d as u32).to_le_bytes())?;
    for k in 0..d {
        w.write_all(&(g.cells(k) as u64).to_le_bytes())?;
    }
    for k in 0..d {
        w.write_all(&g.length(k).to_le_bytes())?;
    }
    w.write_all(&(f.components() as u32).to_le_bytes())?;
    w.write_all(&[g.boundary().as_u8()])?;
    let mut buf = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], FieldError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Field, FieldError> {
    let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if !(2..=3).contains(&dim) {
        return Err(FieldError::Format(format!("bad dimension {dim}")));
    }
    let mut cells = Vec::with_capacity(dim);
    for _ in 0..dim {
        cells.push(u64::from_le_bytes(read_array(&mut r)?) as usize);
    }
    let mut lengths = Vec::with_capacity(dim);
    for _ in 0..dim {
        lengths.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    let nc = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let [tag] = read_array::<1, _>(&mut r)?;
    let boundary = Boundary::from_u8(tag).ok_or_else(|| FieldError::Format(format!("bad boundary tag {tag}")))?;
    let grid = Grid::new(&cells, &lengths, boundary)?;
    let kind = kind_for(nc, dim).ok_or_else(|| FieldError::Format(format!("{nc} components in {dim}D")))?;
    let count = grid.node_count() * nc;
    let mut bytes = vec![0u8; 8 * count];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Field::from_vec(grid, kind, data)
}

/// Column names for [`write_csv`]: coordinates then components.
pub fn csv_header(f: &Field) -> Vec<String> {
    let d = f.dim();
    let mut cols: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    match f.kind() {
        FieldKind::Scalar => cols.push("v".into()),
        FieldKind::Vector => cols.extend((1..=d).map(|i| format!("v{i}"))),
        FieldKind::Tensor => {
            for i in 1..=d {
                cols.extend((1..=d).map(|j| format!("v{i}{j}")));
            }
        }
    }
    cols
}

/// Largest grid written as CSV.
pub const CSV_MAX_NODES: usize = 1 << 16;

/// One row per node with coordinates and component values.
pub fn write_csv<W: Write>(f: &Field, mut w: W) -> Result<(), FieldError> {
    let g = f.grid();
    if g.node_count() > CSV_MAX_NODES {
        return Err(FieldError::Format(format!(
            "{} nodes is too many for CSV output (limit {CSV_MAX_NODES})",
            g.node_count()
        )));
    }
    writeln!(w, "{}", csv_header(f).join(","))?;
    for node in 0..g.node_count() {
        let x = g.position(node);
        let mut row: Vec<String> = x[..g.dim()].iter().map(|v| format!("{v:.16e}")).collect();
        row.extend(f.node(node).iter().map(|v| format!("{v:.16e}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
