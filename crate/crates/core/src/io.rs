//! Binary and CSV storage for matrices and solver factors.
//!
//! All integers are `u64` and all reals `f64`, little-endian. A matrix is
//! `rows, cols` followed by `rows * cols` entries in column-major order; an
//! index list is its length followed by the indices. Every container starts
//! with an 8-byte magic tag naming its kind and version:
//!
//! | tag        | payload |
//! |------------|---------|
//! | `BIEMAT01` | one matrix |
//! | `BIEHBS01` | `n, levels, eps`, then per node `1..=2^(levels+1)-1`: row skeleton, column skeleton, `U`, `V`, `D`, `B12`, `B21`, proxy flag (`u64` 0/1) and, if set, `center.x, center.y, radius, count` |
//! | `BIEINV01` | an `HBS` container, then per node `E`, `F^T`, `G`, `D̂` |
//! | `BIEUPD01` | fingerprint (`n_o, n_p, cut_start, cut_len, hash`), kept, cut, then `L, R, skeleton, k0` for kc, `B_cc`, the same four for op and pk |
//! | `BIEPRT01` | an `UPD` container, then `A_pp`, `Z_o`, `Z_p` |
//!
//! A perturbed solver is stored without its original HBS solver, which is
//! shared between perturbations and stored once.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::hbs::{HbsRep, HbsSolver, NodeFactors, NodeInverse, Tree};
use crate::lowrank::ProxySurface;
use crate::update::{
    perturbed_solver_from_parts, BlockFactor, Dependence, Fingerprint, PerturbedSolver, UpdateFactors, MANIFEST,
};

const MAT_TAG: &[u8; 8] = b"BIEMAT01";
const HBS_TAG: &[u8; 8] = b"BIEHBS01";
const INV_TAG: &[u8; 8] = b"BIEINV01";
const UPD_TAG: &[u8; 8] = b"BIEUPD01";
const PRT_TAG: &[u8; 8] = b"BIEPRT01";

/// Refuses headers claiming more than this many entries in one matrix.
const MAX_ENTRIES: u64 = 1 << 34;

/// Little-endian writer over any byte sink.
pub struct Encoder<W: Write> {
    out: W,
}

impl<W: Write> Encoder<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    pub fn tag(&mut self, tag: &[u8; 8]) -> Result<()> {
        Ok(self.out.write_all(tag)?)
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    pub fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    pub fn indices(&mut self, idx: &[usize]) -> Result<()> {
        self.usize(idx.len())?;
        idx.iter().try_for_each(|&i| self.usize(i))
    }

    pub fn matrix(&mut self, m: MatRef<'_, f64>) -> Result<()> {
        self.usize(m.nrows())?;
        self.usize(m.ncols())?;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                self.f64(m[(i, j)])?;
            }
        }
        Ok(())
    }
}

/// Little-endian reader matching [`Encoder`].
pub struct Decoder<R: Read> {
    input: R,
}

impl<R: Read> Decoder<R> {
    pub fn new(input: R) -> Self {
        Self { input }
    }

    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.input.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated input".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }

    pub fn expect_tag(&mut self, tag: &[u8; 8]) -> Result<()> {
        let got = self.bytes::<8>()?;
        if &got != tag {
            return Err(Error::Format(format!(
                "expected tag {:?}, found {:?}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(&got)
            )));
        }
        Ok(())
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("value {v} does not fit in usize")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    pub fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.u64()?;
        if n > MAX_ENTRIES {
            return Err(Error::Format(format!("index list of length {n}")));
        }
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn matrix(&mut self) -> Result<Mat<f64>> {
        let (r, c) = (self.u64()?, self.u64()?);
        if r.checked_mul(c).is_none_or(|n| n > MAX_ENTRIES) {
            return Err(Error::Format(format!("matrix header {r}x{c} is too large")));
        }
        let mut m = Mat::<f64>::zeros(r as usize, c as usize);
        for j in 0..c as usize {
            for i in 0..r as usize {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }

    /// Fails unless the input is exhausted.
    pub fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.input.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after container".into())),
        }
    }
}

fn create(path: &Path) -> Result<Encoder<BufWriter<File>>> {
    Ok(Encoder::new(BufWriter::new(File::create(path)?)))
}

fn open(path: &Path) -> Result<Decoder<BufReader<File>>> {
    Ok(Decoder::new(BufReader::new(File::open(path)?)))
}

fn flush(enc: Encoder<BufWriter<File>>) -> Result<()> {
    Ok(enc.into_inner().flush()?)
}

pub fn write_matrix(path: &Path, m: MatRef<'_, f64>) -> Result<()> {
    let mut enc = create(path)?;
    enc.tag(MAT_TAG)?;
    enc.matrix(m)?;
    flush(enc)
}

pub fn read_matrix(path: &Path) -> Result<Mat<f64>> {
    let mut dec = open(path)?;
    dec.expect_tag(MAT_TAG)?;
    let m = dec.matrix()?;
    dec.finish()?;
    Ok(m)
}

/// One matrix row per line, full precision. Intended for small matrices.
pub fn write_matrix_csv<W: Write>(m: MatRef<'_, f64>, mut out: W) -> Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn encode_hbs<W: Write>(enc: &mut Encoder<W>, rep: &HbsRep) -> Result<()> {
    enc.tag(HBS_TAG)?;
    enc.usize(rep.n())?;
    enc.usize(rep.tree.levels())?;
    enc.f64(rep.eps)?;
    for f in &rep.nodes[1..] {
        enc.indices(&f.row_skel)?;
        enc.indices(&f.col_skel)?;
        for m in [&f.u, &f.v, &f.d, &f.b12, &f.b21] {
            enc.matrix(m.as_ref())?;
        }
        match &f.proxy {
            None => enc.u64(0)?,
            Some(p) => {
                enc.u64(1)?;
                enc.f64(p.center.x)?;
                enc.f64(p.center.y)?;
                enc.f64(p.radius)?;
                enc.usize(p.points.len())?;
            }
        }
    }
    Ok(())
}

fn decode_hbs<R: Read>(dec: &mut Decoder<R>) -> Result<HbsRep> {
    dec.expect_tag(HBS_TAG)?;
    let n = dec.usize()?;
    let levels = dec.usize()?;
    if n == 0 || levels >= 48 || n < (1 << levels) {
        return Err(Error::Format(format!("tree with n = {n} and {levels} levels")));
    }
    let eps = dec.f64()?;
    let tree = Tree::with_levels(n, levels);
    let mut nodes = vec![NodeFactors::default()];
    for t in 1..=tree.node_count() {
        let row_skel = dec.indices()?;
        let col_skel = dec.indices()?;
        let range = tree.range(t);
        if row_skel.iter().chain(&col_skel).any(|i| !range.contains(i)) {
            return Err(Error::Format(format!("skeleton of node {t} leaves its box")));
        }
        let (u, v, d, b12, b21) = (dec.matrix()?, dec.matrix()?, dec.matrix()?, dec.matrix()?, dec.matrix()?);
        let proxy = match dec.u64()? {
            0 => None,
            1 => {
                let center = Point::new(dec.f64()?, dec.f64()?);
                let radius = dec.f64()?;
                Some(ProxySurface::new(center, radius, dec.usize()?))
            }
            flag => return Err(Error::Format(format!("proxy flag {flag} at node {t}"))),
        };
        nodes.push(NodeFactors {
            row_skel,
            col_skel,
            u,
            v,
            d,
            b12,
            b21,
            proxy,
        });
    }
    Ok(HbsRep { tree, eps, nodes })
}

pub fn save_hbs(rep: &HbsRep, path: &Path) -> Result<()> {
    let mut enc = create(path)?;
    encode_hbs(&mut enc, rep)?;
    flush(enc)
}

pub fn load_hbs(path: &Path) -> Result<HbsRep> {
    let mut dec = open(path)?;
    let rep = decode_hbs(&mut dec)?;
    dec.finish()?;
    Ok(rep)
}

/// Stores the inverse factors together with the representation they invert.
pub fn save_hbs_solver(solver: &HbsSolver, path: &Path) -> Result<()> {
    let mut enc = create(path)?;
    enc.tag(INV_TAG)?;
    encode_hbs(&mut enc, &solver.rep)?;
    for node in &solver.nodes[1..] {
        for m in [&node.e, &node.ft, &node.g, &node.dhat] {
            enc.matrix(m.as_ref())?;
        }
    }
    flush(enc)
}

pub fn load_hbs_solver(path: &Path) -> Result<HbsSolver> {
    let mut dec = open(path)?;
    dec.expect_tag(INV_TAG)?;
    let rep = decode_hbs(&mut dec)?;
    let mut nodes = vec![NodeInverse::default()];
    for _ in 1..=rep.tree.node_count() {
        nodes.push(NodeInverse {
            e: dec.matrix()?,
            ft: dec.matrix()?,
            g: dec.matrix()?,
            dhat: dec.matrix()?,
        });
    }
    dec.finish()?;
    Ok(HbsSolver { rep, nodes })
}

fn encode_block<W: Write>(enc: &mut Encoder<W>, b: &BlockFactor) -> Result<()> {
    enc.matrix(b.l.as_ref())?;
    enc.matrix(b.r.as_ref())?;
    enc.indices(&b.skeleton)?;
    enc.usize(b.k0)
}

fn decode_block<R: Read>(dec: &mut Decoder<R>, what: &str) -> Result<BlockFactor> {
    let b = BlockFactor {
        l: dec.matrix()?,
        r: dec.matrix()?,
        skeleton: dec.indices()?,
        k0: dec.usize()?,
    };
    if b.l.ncols() != b.skeleton.len() || b.r.nrows() != b.skeleton.len() {
        return Err(Error::Format(format!(
            "{what}: L has {} columns and R {} rows for a skeleton of {}",
            b.l.ncols(),
            b.r.nrows(),
            b.skeleton.len()
        )));
    }
    Ok(b)
}

fn encode_update<W: Write>(enc: &mut Encoder<W>, uf: &UpdateFactors) -> Result<()> {
    enc.tag(UPD_TAG)?;
    let fp = &uf.fingerprint;
    for v in [fp.n_original, fp.n_added, fp.cut_start, fp.cut_len] {
        enc.usize(v)?;
    }
    enc.u64(fp.hash)?;
    enc.indices(&uf.kept)?;
    enc.indices(&uf.cut)?;
    encode_block(enc, &uf.kc)?;
    enc.matrix(uf.b_cc.as_ref())?;
    encode_block(enc, &uf.op)?;
    encode_block(enc, &uf.pk)
}

fn decode_update<R: Read>(dec: &mut Decoder<R>) -> Result<UpdateFactors> {
    dec.expect_tag(UPD_TAG)?;
    let fingerprint = Fingerprint {
        n_original: dec.usize()?,
        n_added: dec.usize()?,
        cut_start: dec.usize()?,
        cut_len: dec.usize()?,
        hash: dec.u64()?,
    };
    let kept = dec.indices()?;
    let cut = dec.indices()?;
    let (no, np) = (fingerprint.n_original, fingerprint.n_added);
    if kept.len() + cut.len() != no || cut.len() != fingerprint.cut_len {
        return Err(Error::Format(format!(
            "{} kept and {} cut nodes for N_o = {no}",
            kept.len(),
            cut.len()
        )));
    }
    let kc = decode_block(dec, "kc")?;
    let b_cc = dec.matrix()?;
    let op = decode_block(dec, "op")?;
    let pk = decode_block(dec, "pk")?;
    let shapes = [
        (kc.l.nrows(), kept.len()),
        (kc.r.ncols(), cut.len()),
        (b_cc.nrows(), cut.len()),
        (b_cc.ncols(), cut.len()),
        (op.l.nrows(), no),
        (op.r.ncols(), np),
        (pk.l.nrows(), np),
        (pk.r.ncols(), kept.len()),
    ];
    if shapes.iter().any(|(a, b)| a != b) {
        return Err(Error::Format("update blocks do not match the stored index sets".into()));
    }
    Ok(UpdateFactors {
        fingerprint,
        kept,
        cut,
        n_original: no,
        n_added: np,
        kc,
        b_cc,
        op,
        pk,
    })
}

pub fn save_update_factors(uf: &UpdateFactors, path: &Path) -> Result<()> {
    let mut enc = create(path)?;
    encode_update(&mut enc, uf)?;
    flush(enc)
}

pub fn load_update_factors(path: &Path) -> Result<UpdateFactors> {
    let mut dec = open(path)?;
    let uf = decode_update(&mut dec)?;
    dec.finish()?;
    Ok(uf)
}

/// Stores everything placement-dependent; the original solver is not included.
pub fn save_perturbed_solver(ps: &PerturbedSolver<'_>, path: &Path) -> Result<()> {
    let mut enc = create(path)?;
    enc.tag(PRT_TAG)?;
    encode_update(&mut enc, &ps.factors)?;
    for m in [&ps.a_pp, &ps.z_o, &ps.z_p] {
        enc.matrix(m.as_ref())?;
    }
    flush(enc)
}

/// Reattaches stored update parts to `base`, which must be the original solver
/// they were built against.
pub fn load_perturbed_solver<'a>(base: &'a HbsSolver, path: &Path) -> Result<PerturbedSolver<'a>> {
    let mut dec = open(path)?;
    dec.expect_tag(PRT_TAG)?;
    let factors = decode_update(&mut dec)?;
    let (a_pp, z_o, z_p) = (dec.matrix()?, dec.matrix()?, dec.matrix()?);
    dec.finish()?;
    perturbed_solver_from_parts(base, a_pp, factors, z_o, z_p)
}

/// Which stored components must be rebuilt when the geometry changes.
pub fn write_manifest<W: Write>(mut out: W) -> Result<()> {
    writeln!(out, "component,depends_on,rebuild_when")?;
    for (name, dep) in MANIFEST {
        let (on, when) = match dep {
            Dependence::Original => ("original", "the original curve or its discretization changes"),
            Dependence::Cut => ("cut", "the removed arc changes"),
            Dependence::Shape => ("shape", "the added piece changes shape or discretization"),
            Dependence::Placement => ("placement", "the added piece moves or changes"),
        };
        writeln!(out, "{name},{on},{when}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = Mat::from_fn(7, 3, |i, j| (i as f64 - 2.5) * 10f64.powi(j as i32 * 7) / 3.0);
        let mut enc = Encoder::new(Vec::new());
        enc.matrix(m.as_ref()).unwrap();
        let bytes = enc.into_inner();
        assert_eq!(bytes.len(), 16 + 8 * 21);
        let back = Decoder::new(bytes.as_slice()).matrix().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_headers() {
        let mut enc = Encoder::new(Vec::new());
        enc.u64(1 << 40).unwrap();
        enc.u64(1 << 40).unwrap();
        let bytes = enc.into_inner();
        assert!(matches!(Decoder::new(bytes.as_slice()).matrix(), Err(Error::Format(_))));
        let short = [0u8; 12];
        assert!(matches!(Decoder::new(&short[..]).matrix(), Err(Error::Format(_))));
        assert!(Decoder::new(&b"BIEMAT02"[..]).expect_tag(MAT_TAG).is_err());
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let mut out = Vec::new();
        write_matrix_csv(Mat::<f64>::identity(3, 2).as_ref(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1e0,0e0\n0e0,1e0\n0e0,0e0\n");
    }

    #[test]
    fn manifest_lists_every_component() {
        let mut out = Vec::new();
        write_manifest(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), MANIFEST.len() + 1);
    }
}
