//! CSV ingestion: header `x1,...,xk,y[,sigma]`, translation so the query
//! point moves to the origin, optional basis rotation, and noise-sd
//! resolution (column, estimate, or error).

use std::path::Path;

use anyhow::{bail, Context, Result};

use adaptci_core::variance::{estimate_sigma2, rule_of_thumb_bandwidth};
use adaptci_core::Design;

pub struct IngestOptions<'a> {
    /// Query point in original coordinates; defaults to the origin.
    pub x0: Option<Vec<f64>>,
    /// Row-major orthonormal basis to express coordinates in.
    pub basis: Option<&'a [Vec<f64>]>,
    /// Estimate a homoskedastic sigma when the file has no sigma column.
    pub estimate_sigma: bool,
    /// Bandwidth for the sigma estimate; rule-of-thumb when absent.
    pub bandwidth: Option<f64>,
}

#[derive(Debug)]
pub struct IngestedData {
    pub design: Design,
    pub y: Vec<f64>,
    /// Set when sigma was estimated rather than supplied.
    pub estimated_sigma2: Option<f64>,
    pub dim: usize,
}

pub fn ingest(path: &Path, opts: &IngestOptions) -> Result<IngestedData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;

    let headers = reader.headers().context("reading CSV header")?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let mut k = 0;
    while k < cols.len() && cols[k] == format!("x{}", k + 1) {
        k += 1;
    }
    if k == 0 {
        bail!("expected header starting with x1,...,xk; got {:?}", cols);
    }
    let has_sigma = match &cols[k..] {
        ["y"] => false,
        ["y", "sigma"] => true,
        rest => bail!("expected columns y[,sigma] after x1..x{k}; got {rest:?}"),
    };

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut sigma = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading CSV data row {}", row_idx + 2))?;
        let parse = |col: usize| -> Result<f64> {
            let tok = record.get(col).unwrap_or("");
            let v: f64 = tok.parse().with_context(|| {
                format!("line {}, column {} ({}): cannot parse {tok:?}", row_idx + 2, col + 1, cols[col])
            })?;
            if !v.is_finite() {
                bail!("line {}, column {}: non-finite value", row_idx + 2, col + 1);
            }
            Ok(v)
        };
        let mut p = Vec::with_capacity(k);
        for c in 0..k {
            p.push(parse(c)?);
        }
        points.push(p);
        y.push(parse(k)?);
        if has_sigma {
            let s = parse(k + 1)?;
            if s <= 0.0 {
                bail!("line {}: sigma must be strictly positive, got {s}", row_idx + 2);
            }
            sigma.push(s);
        }
    }
    if points.is_empty() {
        bail!("no data rows in {}", path.display());
    }

    if let Some(x0) = &opts.x0 {
        if x0.len() != k {
            bail!("--x0 has {} coordinates but data has {k}", x0.len());
        }
        for p in &mut points {
            for c in 0..k {
                p[c] -= x0[c];
            }
        }
    }
    if let Some(basis) = opts.basis {
        if basis.len() != k {
            bail!("basis is {}x{} but data has dimension {k}", basis.len(), basis.len());
        }
        for p in &mut points {
            let rotated: Vec<f64> =
                (0..k).map(|r| (0..k).map(|c| basis[r][c] * p[c]).sum()).collect();
            *p = rotated;
        }
    }

    let mut estimated = None;
    let sigma = if has_sigma {
        sigma
    } else if opts.estimate_sigma {
        let h = match opts.bandwidth {
            Some(h) => h,
            None => rule_of_thumb_bandwidth(&points)?,
        };
        let (s2, _) = estimate_sigma2(&points, &y, h)?;
        if s2 <= 0.0 {
            bail!("estimated sigma^2 = {s2} is not positive; supply a sigma column");
        }
        estimated = Some(s2);
        vec![s2.sqrt(); points.len()]
    } else {
        bail!("no sigma column in {}; add one or pass --estimate-sigma", path.display());
    };

    let design = Design::new(points, sigma)?;
    Ok(IngestedData { design, y, estimated_sigma2: estimated, dim: k })
}
