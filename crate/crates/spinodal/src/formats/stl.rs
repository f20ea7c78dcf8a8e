//! Binary STL: 80-byte header, `u32` triangle count, then per triangle the
//! normal and three vertices as `f32` triples and a zero `u16` attribute.

use spinodal_core::field::SurfaceMesh;

pub const HEADER: &[u8] = b"spinodal binary STL";
const RECORD_LEN: usize = 50;

pub fn encode(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + RECORD_LEN * mesh.len());
    out.extend_from_slice(HEADER);
    out.resize(80, 0);
    out.extend_from_slice(&(mesh.len() as u32).to_le_bytes());
    for t in 0..mesh.len() {
        let n = mesh.normals[t];
        for x in n.iter().chain(mesh.corners(t).iter().flatten()) {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
}

pub fn decode(bytes: &[u8]) -> Option<Vec<Facet>> {
    let count = u32::from_le_bytes(bytes.get(80..84)?.try_into().ok()?) as usize;
    let body = bytes.get(84..)?;
    if body.len() != count * RECORD_LEN {
        return None;
    }
    let f = |r: &[u8], i: usize| f32::from_le_bytes(r[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    Some(
        body.chunks_exact(RECORD_LEN)
            .map(|r| Facet {
                normal: [f(r, 0), f(r, 1), f(r, 2)],
                vertices: [[f(r, 3), f(r, 4), f(r, 5)], [f(r, 6), f(r, 7), f(r, 8)], [f(r, 9), f(r, 10), f(r, 11)]],
            })
            .collect(),
    )
}
