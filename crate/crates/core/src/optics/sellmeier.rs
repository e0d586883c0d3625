//! Sellmeier refractive-index fits and the crystal data file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};

/// Environment variable naming a directory that holds `crystals.toml`.
pub const CRYSTAL_DATA_ENV: &str = "ERASER_CRYSTAL_DATA";
pub const CRYSTAL_DATA_FILE: &str = "crystals.toml";

const BUILTIN_DATA: &str = include_str!("../../data/crystals.toml");
const SUPPORTED_VERSION: u32 = 1;

/// `n² = a + Σ b_k λ² / (λ² − c_k)` with λ in µm.
#[derive(Clone, Debug, PartialEq)]
pub struct SellmeierCoefficients {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Validity range in µm.
    pub range_um: (f64, f64),
    pub source: String,
}

impl SellmeierCoefficients {
    fn n_squared_um(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.a
            + self
                .b
                .iter()
                .zip(&self.c)
                .map(|(b, c)| b * l2 / (l2 - c))
                .sum::<f64>()
    }

    /// Refractive index at `wavelength_nm`.
    pub fn index(&self, wavelength_nm: f64) -> Result<f64> {
        let lambda_um = wavelength_nm / 1000.0;
        let (lo, hi) = self.range_um;
        if !(lo..=hi).contains(&lambda_um) {
            return Err(Error::WavelengthOutOfRange {
                wavelength_nm,
                min_nm: lo * 1000.0,
                max_nm: hi * 1000.0,
            });
        }
        Ok(self.n_squared_um(lambda_um).sqrt())
    }

    /// Evenly spaced wavelengths (nm) across the valid range.
    fn sample_points(&self, count: usize) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = self.range_um;
        (0..count).map(move |k| 1000.0 * (lo + (hi - lo) * k as f64 / (count - 1) as f64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ray {
    Ordinary,
    Extraordinary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpticSign {
    /// n_e < n_o
    Negative,
    /// n_e > n_o
    Positive,
    /// n_e = n_o; only used for reference materials.
    Isotropic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniaxialCrystal {
    pub name: String,
    pub ordinary: SellmeierCoefficients,
    pub extraordinary: SellmeierCoefficients,
    pub sign: OpticSign,
}

impl UniaxialCrystal {
    /// Principal index for `ray` (the extraordinary value is the one for
    /// propagation perpendicular to the optic axis).
    pub fn refractive_index(&self, wavelength_nm: f64, ray: Ray) -> Result<f64> {
        match ray {
            Ray::Ordinary => self.ordinary.index(wavelength_nm),
            Ray::Extraordinary => self.extraordinary.index(wavelength_nm),
        }
    }

    /// Index seen by `ray` travelling at `psi` from the optic axis.
    pub fn index_along(&self, wavelength_nm: f64, ray: Ray, psi: f64) -> Result<f64> {
        let n_o = self.ordinary.index(wavelength_nm)?;
        match ray {
            Ray::Ordinary => Ok(n_o),
            Ray::Extraordinary => {
                let n_e = self.extraordinary.index(wavelength_nm)?;
                Ok(super::index_at_angle(n_o, n_e, psi))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    version: u32,
    #[serde(default)]
    index: Vec<Spanned<RawIndex>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndex {
    crystal: String,
    sign: OpticSign,
    ray: String,
    a: f64,
    b: Vec<f64>,
    c: Vec<f64>,
    range_um: [f64; 2],
    source: String,
}

/// Crystals keyed by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrystalCatalog {
    crystals: BTreeMap<String, UniaxialCrystal>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl CrystalCatalog {
    /// Parses the data file format. Any malformed record is an error that
    /// names its line.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::CrystalData {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        if raw.version != SUPPORTED_VERSION {
            return Err(Error::CrystalData {
                line: 1,
                message: format!("unsupported data version {}", raw.version),
            });
        }

        type Partial = (
            usize,
            OpticSign,
            Option<SellmeierCoefficients>,
            Option<SellmeierCoefficients>,
        );
        let mut partial: BTreeMap<String, Partial> = BTreeMap::new();
        for record in raw.index {
            let line = line_of(text, record.span().start);
            let err = |message: String| Error::CrystalData { line, message };
            let r = record.into_inner();
            let ray = match r.ray.as_str() {
                "ordinary" => Ray::Ordinary,
                "extraordinary" => Ray::Extraordinary,
                other => return Err(err(format!("unknown ray `{other}`"))),
            };
            if r.b.len() != r.c.len() {
                return Err(err(format!(
                    "coefficient lists b ({}) and c ({}) differ in length",
                    r.b.len(),
                    r.c.len()
                )));
            }
            if !r.a.is_finite() || r.b.iter().chain(&r.c).any(|x| !x.is_finite()) {
                return Err(err("non-finite coefficient".into()));
            }
            let [lo, hi] = r.range_um;
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(err(format!("invalid range_um [{lo}, {hi}]")));
            }
            let coeffs = SellmeierCoefficients {
                a: r.a,
                b: r.b,
                c: r.c,
                range_um: (lo, hi),
                source: r.source,
            };
            for wl in coeffs.sample_points(200) {
                let n2 = coeffs.n_squared_um(wl / 1000.0);
                if !(n2 > 1.0 && n2 < 9.0) {
                    return Err(err(format!(
                        "index outside (1, 3) at {wl:.1} nm within the declared range"
                    )));
                }
            }
            let entry = partial
                .entry(r.crystal.clone())
                .or_insert((line, r.sign, None, None));
            if entry.1 != r.sign {
                return Err(err(format!(
                    "sign disagrees with the record on line {}",
                    entry.0
                )));
            }
            let slot = match ray {
                Ray::Ordinary => &mut entry.2,
                Ray::Extraordinary => &mut entry.3,
            };
            if slot.is_some() {
                return Err(err(format!(
                    "duplicate {} index for `{}`",
                    r.ray, r.crystal
                )));
            }
            *slot = Some(coeffs);
        }

        let mut crystals = BTreeMap::new();
        for (name, (line, sign, ordinary, extraordinary)) in partial {
            let (Some(ordinary), Some(extraordinary)) = (ordinary, extraordinary) else {
                return Err(Error::CrystalData {
                    line,
                    message: format!(
                        "crystal `{name}` needs both an ordinary and an extraordinary record"
                    ),
                });
            };
            let crystal = UniaxialCrystal {
                name: name.clone(),
                ordinary,
                extraordinary,
                sign,
            };
            check_sign(&crystal).map_err(|message| Error::CrystalData { line, message })?;
            crystals.insert(name, crystal);
        }
        Ok(Self { crystals })
    }

    /// The data file compiled into the library.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_DATA).expect("built-in crystal data is valid")
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Loads `crystals.toml` from the directory in [`CRYSTAL_DATA_ENV`] when
    /// set, otherwise the built-in data.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CRYSTAL_DATA_ENV) {
            Some(dir) => Self::load_file(&PathBuf::from(dir).join(CRYSTAL_DATA_FILE)),
            None => Ok(Self::builtin()),
        }
    }

    pub fn get(&self, name: &str) -> Result<&UniaxialCrystal> {
        self.crystals
            .get(name)
            .ok_or_else(|| Error::UnknownCrystal(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.crystals.keys().map(String::as_str)
    }
}

fn check_sign(crystal: &UniaxialCrystal) -> std::result::Result<(), String> {
    let lo = crystal
        .ordinary
        .range_um
        .0
        .max(crystal.extraordinary.range_um.0);
    let hi = crystal
        .ordinary
        .range_um
        .1
        .min(crystal.extraordinary.range_um.1);
    if hi <= lo {
        return Err("ordinary and extraordinary ranges do not overlap".into());
    }
    for k in 0..200 {
        let um = lo + (hi - lo) * k as f64 / 199.0;
        let wl = 1000.0 * um;
        let n_o = crystal.ordinary.n_squared_um(um).sqrt();
        let n_e = crystal.extraordinary.n_squared_um(um).sqrt();
        let ok = match crystal.sign {
            OpticSign::Negative => n_e < n_o,
            OpticSign::Positive => n_e > n_o,
            OpticSign::Isotropic => (n_e - n_o).abs() < 1e-12,
        };
        if !ok {
            return Err(format!(
                "declared sign {:?} violated at {wl:.1} nm (n_o = {n_o}, n_e = {n_e})",
                crystal.sign
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn calcite_sodium_d_line() {
        let cat = CrystalCatalog::builtin();
        let calcite = cat.get("calcite").unwrap();
        // Handbook values at 589.3 nm: n_o = 1.6584, n_e = 1.4864.
        assert_abs_diff_eq!(
            calcite.refractive_index(589.0, Ray::Ordinary).unwrap(),
            1.658,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            calcite.refractive_index(589.0, Ray::Extraordinary).unwrap(),
            1.486,
            epsilon = 1e-3
        );
    }

    #[test]
    fn calcite_is_negative_with_normal_dispersion() {
        let cat = CrystalCatalog::builtin();
        let calcite = cat.get("calcite").unwrap();
        assert_eq!(calcite.sign, OpticSign::Negative);
        for wl in [405.0, 1215.0] {
            let n_o = calcite.refractive_index(wl, Ray::Ordinary).unwrap();
            let n_e = calcite.refractive_index(wl, Ray::Extraordinary).unwrap();
            assert!(n_e < n_o);
        }
        assert!(
            calcite.refractive_index(405.0, Ray::Ordinary).unwrap()
                > calcite.refractive_index(1215.0, Ray::Ordinary).unwrap()
        );
    }

    #[test]
    fn out_of_range_wavelength() {
        let cat = CrystalCatalog::builtin();
        let err = cat
            .get("calcite")
            .unwrap()
            .refractive_index(3000.0, Ray::Ordinary)
            .unwrap_err();
        assert!(matches!(err, Error::WavelengthOutOfRange { .. }));
    }

    #[test]
    fn unknown_crystal() {
        assert!(matches!(
            CrystalCatalog::builtin().get("unobtainium"),
            Err(Error::UnknownCrystal(_))
        ));
    }

    #[test]
    fn malformed_records_name_the_line() {
        let text = r#"version = 1

[[index]]
crystal = "x"
sign = "negative"
ray = "sideways"
a = 1.0
b = [1.0]
c = [0.01]
range_um = [0.3, 2.0]
source = "test"
"#;
        match CrystalCatalog::parse(text).unwrap_err() {
            Error::CrystalData { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("sideways"));
            }
            other => panic!("unexpected {other}"),
        }

        let text = "version = 1\n\n[[index]]\ncrystal = \"x\"\nbogus = 3\n";
        match CrystalCatalog::parse(text).unwrap_err() {
            Error::CrystalData { line, message } => {
                assert!(message.contains("bogus"), "{message}");
                assert!(line >= 3, "line {line}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_partner_record_rejected() {
        let text = r#"version = 1
[[index]]
crystal = "x"
sign = "negative"
ray = "ordinary"
a = 1.5
b = [1.0]
c = [0.01]
range_um = [0.3, 2.0]
source = "test"
"#;
        assert!(matches!(
            CrystalCatalog::parse(text),
            Err(Error::CrystalData { line: 2, .. })
        ));
    }

    #[test]
    fn wrong_declared_sign_rejected() {
        let text = BUILTIN_DATA.replacen("sign = \"negative\"", "sign = \"positive\"", 2);
        assert!(matches!(
            CrystalCatalog::parse(&text),
            Err(Error::CrystalData { .. })
        ));
    }

    #[test]
    fn builtin_data_lists_crystals() {
        let cat = CrystalCatalog::builtin();
        let names: Vec<_> = cat.names().collect();
        assert_eq!(names, ["calcite", "fused-silica"]);
    }
}
