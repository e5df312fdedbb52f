use std::path::PathBuf;

pub struct GoldenMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn load(file: &str) -> Vec<GoldenMatrix> {
    load_from(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden"), file)
}

pub fn load_from(dir: &std::path::Path, file: &str) -> Vec<GoldenMatrix> {
    let path = dir.join(file);
    let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(&bytes[..4], b"GOLD");
    let mut pos = 4;
    let u32_next = |pos: &mut usize| {
        let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
        *pos += 4;
        v as usize
    };
    let count = u32_next(&mut pos);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_next(&mut pos);
        let name = String::from_utf8(bytes[pos..pos + len].to_vec()).unwrap();
        pos += len;
        let rows = u32_next(&mut pos);
        let cols = u32_next(&mut pos);
        let data = bytes[pos..pos + 8 * rows * cols]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        pos += 8 * rows * cols;
        out.push(GoldenMatrix { name, rows, cols, data });
    }
    out
}
