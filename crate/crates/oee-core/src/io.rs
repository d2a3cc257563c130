//! CSV export and import. Floats are written in shortest round-trip form, so a
//! file read back and re-written is byte-identical.

use crate::bulk::SpinTexture;
use crate::entanglement::{EdgeTag, EntanglementSpectrum, EsPoint};
use crate::error::{OeeError, Result};
use crate::realspace::{LocalizationProfile, SpectrumPoint, SpectrumSeries};
use crate::scalar::Real;
use crate::topology::{PhaseDiagram, PointStatus};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureRow {
    pub kx: f64,
    pub ky: f64,
    #[serde(rename = "Sx")]
    pub sx: f64,
    #[serde(rename = "Sy")]
    pub sy: f64,
    #[serde(rename = "Sz")]
    pub sz: f64,
    #[serde(rename = "|S|")]
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealTextureRow {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "Sx")]
    pub sx: f64,
    #[serde(rename = "Sy")]
    pub sy: f64,
    #[serde(rename = "Sz")]
    pub sz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub mu: f64,
    pub delta0: f64,
    pub chern: Option<i64>,
    pub skyrmion: Option<i64>,
    pub min_spin_norm: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub ky: f64,
    pub band_index: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub layer: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsRow {
    pub ky: f64,
    pub index: usize,
    pub xi: f64,
    pub degeneracy: usize,
    pub edge_tag: String,
}

pub fn write_rows<W: Write, R: Serialize>(w: W, rows: &[R]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<Rd: Read, R: DeserializeOwned>(r: Rd) -> Result<Vec<R>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|x| x.map_err(OeeError::from)).collect()
}

pub fn to_csv_string<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| OeeError::Malformed(e.to_string()))
}

fn f<T: Real>(x: T) -> f64 {
    x.to_f64_lossy()
}

pub fn texture_rows<T: Real>(t: &SpinTexture<T>) -> Vec<TextureRow> {
    t.coords
        .iter()
        .zip(&t.vectors)
        .zip(&t.norms)
        .map(|((c, v), n)| TextureRow {
            kx: f(c[0]),
            ky: f(c[1]),
            sx: f(v[0]),
            sy: f(v[1]),
            sz: f(v[2]),
            norm: f(*n),
        })
        .collect()
}

/// Raw (unnormalized) per-site components.
pub fn real_texture_rows<T: Real>(t: &SpinTexture<T>) -> Vec<RealTextureRow> {
    (0..t.vectors.len())
        .map(|i| {
            let v = t.raw(i);
            RealTextureRow {
                x: f(t.coords[i][0]),
                y: f(t.coords[i][1]),
                sx: f(v[0]),
                sy: f(v[1]),
                sz: f(v[2]),
            }
        })
        .collect()
}

/// Rebuilds a periodic texture; `nx` is inferred from the number of distinct `kx`.
pub fn texture_from_rows(rows: &[TextureRow], normalized: bool) -> Result<SpinTexture<f64>> {
    let mut kxs: Vec<f64> = rows.iter().map(|r| r.kx).collect();
    kxs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    kxs.dedup();
    let nx = kxs.len();
    if nx == 0 || !rows.len().is_multiple_of(nx) {
        return Err(OeeError::Malformed("texture rows do not form a grid".into()));
    }
    Ok(SpinTexture {
        nx,
        ny: rows.len() / nx,
        coords: rows.iter().map(|r| [r.kx, r.ky]).collect(),
        vectors: rows.iter().map(|r| [r.sx, r.sy, r.sz]).collect(),
        norms: rows.iter().map(|r| r.norm).collect(),
        normalized,
        periodic: true,
    })
}

pub fn phase_rows<T: Real>(pd: &PhaseDiagram<T>) -> Vec<PhaseRow> {
    pd.points
        .iter()
        .map(|p| PhaseRow {
            mu: f(p.mu),
            delta0: f(p.delta0),
            chern: p.chern,
            skyrmion: p.skyrmion,
            min_spin_norm: f(p.min_spin_norm),
            status: p.status.as_str().to_string(),
        })
        .collect()
}

pub fn parse_status(s: &str) -> Option<PointStatus> {
    [
        PointStatus::Ok,
        PointStatus::GapClosure,
        PointStatus::SingularSpin,
        PointStatus::NotQuantized,
        PointStatus::Failed,
    ]
    .into_iter()
    .find(|p| p.as_str() == s)
}

pub fn spectrum_rows<T: Real>(s: &SpectrumSeries<T>) -> Vec<SpectrumRow> {
    s.points
        .iter()
        .flat_map(|p| {
            p.values.iter().enumerate().map(move |(i, &e)| SpectrumRow {
                ky: f(p.ky),
                band_index: i,
                energy: f(e),
            })
        })
        .collect()
}

pub fn spectrum_from_rows(rows: &[SpectrumRow]) -> SpectrumSeries<f64> {
    let mut points: Vec<SpectrumPoint<f64>> = Vec::new();
    for r in rows {
        match points.last_mut() {
            Some(p) if p.ky.to_bits() == r.ky.to_bits() && r.band_index == p.values.len() => {
                p.values.push(r.energy)
            }
            _ => points.push(SpectrumPoint { ky: r.ky, values: vec![r.energy] }),
        }
    }
    SpectrumSeries { points }
}

pub fn localization_rows<T: Real>(p: &LocalizationProfile<T>) -> Vec<LocalizationRow> {
    p.layer_index
        .iter()
        .zip(&p.probability)
        .map(|(&layer, &pr)| LocalizationRow { layer, probability: f(pr) })
        .collect()
}

pub fn es_rows<T: Real>(s: &EntanglementSpectrum<T>) -> Vec<EsRow> {
    s.points
        .iter()
        .flat_map(|p| {
            (0..p.xi.len()).map(move |i| EsRow {
                ky: f(p.ky),
                index: i,
                xi: f(p.xi[i]),
                degeneracy: p.degeneracy[i],
                edge_tag: p.tags[i].as_str().to_string(),
            })
        })
        .collect()
}

/// Rebuilds a spectrum from rows; eigenvector weights are not stored and come back as zero,
/// profiles as empty (band matching then falls back to the edge tags).
pub fn es_from_rows(rows: &[EsRow]) -> Result<EntanglementSpectrum<f64>> {
    let mut points: Vec<EsPoint<f64>> = Vec::new();
    for r in rows {
        let tag = EdgeTag::parse(&r.edge_tag)
            .ok_or_else(|| OeeError::Malformed(format!("unknown edge tag {:?}", r.edge_tag)))?;
        let fresh =
            !matches!(points.last(), Some(p) if p.ky.to_bits() == r.ky.to_bits() && r.index == p.xi.len());
        if fresh {
            points.push(EsPoint {
                ky: r.ky,
                xi: vec![],
                degeneracy: vec![],
                tags: vec![],
                weights: vec![],
                profile: vec![],
            });
        }
        let p = points.last_mut().expect("just pushed");
        p.xi.push(r.xi);
        p.degeneracy.push(r.degeneracy);
        p.tags.push(tag);
        p.weights.push([0.0; 3]);
    }
    Ok(EntanglementSpectrum { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip_is_byte_identical() {
        let s = SpectrumSeries {
            points: vec![
                SpectrumPoint { ky: -std::f64::consts::PI, values: vec![-1.0 / 3.0, 0.1 + 0.2, 7e-300] },
                SpectrumPoint { ky: 0.5, values: vec![f64::MIN_POSITIVE, -0.0, 1e17] },
            ],
        };
        let text = to_csv_string(&spectrum_rows(&s)).unwrap();
        assert!(text.starts_with("ky,band_index,energy\n"));
        let back = spectrum_from_rows(&read_rows::<_, SpectrumRow>(text.as_bytes()).unwrap());
        assert_eq!(back, s);
        assert_eq!(to_csv_string(&spectrum_rows(&back)).unwrap(), text);
    }

    #[test]
    fn headers_match_export_format() {
        let t = texture_rows(&SpinTexture {
            nx: 1,
            ny: 1,
            coords: vec![[0.0f64, 0.0]],
            vectors: vec![[0.0, 0.0, 1.0]],
            norms: vec![1.0],
            normalized: true,
            periodic: true,
        });
        assert!(to_csv_string(&t).unwrap().starts_with("kx,ky,Sx,Sy,Sz,|S|\n"));
        let es = vec![EsRow { ky: 0.0, index: 0, xi: 0.5, degeneracy: 2, edge_tag: "virtual".into() }];
        assert!(to_csv_string(&es).unwrap().starts_with("ky,index,xi,degeneracy,edge_tag\n"));
        let pd = vec![PhaseRow {
            mu: 0.0,
            delta0: 1.0,
            chern: None,
            skyrmion: Some(-1),
            min_spin_norm: 0.1,
            status: "ok".into(),
        }];
        let text = to_csv_string(&pd).unwrap();
        assert!(text.starts_with("mu,delta0,chern,skyrmion,min_spin_norm,status\n"));
        assert_eq!(read_rows::<_, PhaseRow>(text.as_bytes()).unwrap(), pd);
    }

    #[test]
    fn unknown_edge_tag_rejected() {
        let rows = vec![EsRow { ky: 0.0, index: 0, xi: 0.5, degeneracy: 1, edge_tag: "left".into() }];
        assert!(es_from_rows(&rows).is_err());
    }
}
