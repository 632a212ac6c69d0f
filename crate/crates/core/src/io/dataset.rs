//! Self-describing binary container for one synthesized scene.
//!
//! Layout, all integers and floats little endian:
//!
//! ```text
//! magic   b"BDSD"
//! version u16
//! count   u32                       number of records
//! record  name_len u16, name (UTF-8),
//!         kind u8 (1 text, 2 u64, 3 f64, 4 complex f64 as re, im),
//!         ndim u32, dims u64 x ndim, payload (product of dims elements)
//! ```
//!
//! Tensors are stored first index fastest, matching [`ComplexTensor`].

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64 as C64;

use super::config::parse_config;
use crate::error::{Error, Result};
use crate::eval::{noise_seed, trial_scene, SweepConfig, TrialScene};
use crate::scene::{add_noise, gen_pilots, synthesize, Direction, PilotSet, RisCodebook, SceneTruth};
use crate::tensor::{ComplexMatrix, ComplexTensor};

pub const MAGIC: &[u8; 4] = b"BDSD";
pub const VERSION: u16 = 1;

/// Records larger than this many elements are treated as corrupt.
const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq)]
enum Payload {
    Text(String),
    U64(Vec<u64>),
    F64(Vec<f64>),
    Complex(Vec<C64>),
}

impl Payload {
    fn kind(&self) -> u8 {
        match self {
            Payload::Text(_) => 1,
            Payload::U64(_) => 2,
            Payload::F64(_) => 3,
            Payload::Complex(_) => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Record {
    name: String,
    dims: Vec<usize>,
    payload: Payload,
}

impl Record {
    fn text(name: &str, s: &str) -> Self {
        Self { name: name.into(), dims: vec![s.len()], payload: Payload::Text(s.into()) }
    }

    fn u64s(name: &str, v: Vec<u64>) -> Self {
        Self { name: name.into(), dims: vec![v.len()], payload: Payload::U64(v) }
    }

    fn f64s(name: &str, v: Vec<f64>) -> Self {
        Self { name: name.into(), dims: vec![v.len()], payload: Payload::F64(v) }
    }

    fn tensor(name: &str, t: &ComplexTensor) -> Self {
        Self { name: name.into(), dims: t.shape().to_vec(), payload: Payload::Complex(t.data().to_vec()) }
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let name = self.name.as_bytes();
        w.write_u16::<LE>(name.len() as u16)?;
        w.write_all(name)?;
        w.write_u8(self.payload.kind())?;
        w.write_u32::<LE>(self.dims.len() as u32)?;
        for &d in &self.dims {
            w.write_u64::<LE>(d as u64)?;
        }
        match &self.payload {
            Payload::Text(s) => w.write_all(s.as_bytes())?,
            Payload::U64(v) => v.iter().try_for_each(|&x| w.write_u64::<LE>(x))?,
            Payload::F64(v) => v.iter().try_for_each(|&x| w.write_f64::<LE>(x))?,
            Payload::Complex(v) => v.iter().try_for_each(|z| {
                w.write_f64::<LE>(z.re)?;
                w.write_f64::<LE>(z.im)
            })?,
        }
        Ok(())
    }

    fn read<R: Read>(r: &mut R) -> Result<Self> {
        let name_len = r.read_u16::<LE>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("record name is not UTF-8".into()))?;
        let kind = r.read_u8()?;
        let ndim = r.read_u32::<LE>()? as usize;
        if ndim > 16 {
            return Err(Error::Format(format!("record `{name}` claims {ndim} dimensions")));
        }
        let mut dims = Vec::with_capacity(ndim);
        let mut count: u64 = 1;
        for _ in 0..ndim {
            let d = r.read_u64::<LE>()?;
            count = count.saturating_mul(d);
            dims.push(d as usize);
        }
        if count > MAX_ELEMENTS {
            return Err(Error::Format(format!("record `{name}` claims {count} elements")));
        }
        let n = count as usize;
        let payload = match kind {
            1 => {
                let mut bytes = vec![0u8; n];
                r.read_exact(&mut bytes)?;
                Payload::Text(
                    String::from_utf8(bytes).map_err(|_| Error::Format(format!("record `{name}` is not UTF-8")))?,
                )
            }
            2 => Payload::U64((0..n).map(|_| r.read_u64::<LE>()).collect::<std::io::Result<_>>()?),
            3 => Payload::F64((0..n).map(|_| r.read_f64::<LE>()).collect::<std::io::Result<_>>()?),
            4 => Payload::Complex(
                (0..n)
                    .map(|_| Ok(C64::new(r.read_f64::<LE>()?, r.read_f64::<LE>()?)))
                    .collect::<std::io::Result<_>>()?,
            ),
            other => return Err(Error::Format(format!("record `{name}` has unknown kind {other}"))),
        };
        Ok(Self { name, dims, payload })
    }
}

/// One synthesized scene: the configuration it came from, ground truth,
/// codebook, pilots and the (possibly noisy) echo.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Configuration file body; the dataset is reproducible from it.
    pub config_text: String,
    pub master_seed: u64,
    /// Seed of the trial the scene was drawn for.
    pub trial_seed: u64,
    pub snr_db: f64,
    /// `‖Y‖² / ‖Z‖²` of the noise draw in dB; `+inf` without noise.
    pub realized_snr_db: f64,
    pub noiseless: bool,
    pub truth: SceneTruth,
    pub codebook: RisCodebook,
    pub pilots: PilotSet,
    pub echo: ComplexTensor,
}

impl Dataset {
    /// Draws trial 0 of `cfg.sweep.seed` and adds noise at `snr_db` with the
    /// same streams a sweep uses for its first SNR point.
    pub fn simulate(cfg: &SweepConfig, config_text: &str, snr_db: f64) -> Result<Self> {
        cfg.validate()?;
        let pilots = gen_pilots(&cfg.system)?;
        let scene = trial_scene(cfg, &pilots, 0)?;
        let (echo, realized) = add_noise(&scene.clean, snr_db, noise_seed(scene.seed, 0))?;
        Ok(Self {
            config_text: config_text.into(),
            master_seed: cfg.sweep.seed,
            trial_seed: scene.seed,
            snr_db,
            realized_snr_db: realized,
            noiseless: snr_db == f64::INFINITY,
            truth: scene.truth,
            codebook: scene.codebook,
            pilots,
            echo,
        })
    }

    pub fn config(&self) -> Result<SweepConfig> {
        parse_config(&self.config_text)
    }

    /// The trial inputs in the form the evaluation code expects; the clean
    /// echo is synthesized again from the stored truth.
    pub fn trial_scene(&self, cfg: &SweepConfig) -> Result<TrialScene> {
        let clean = synthesize(&self.truth, &cfg.system, &self.codebook, &self.pilots)?;
        Ok(TrialScene { seed: self.trial_seed, truth: self.truth.clone(), codebook: self.codebook.clone(), clean })
    }

    fn records(&self) -> Vec<Record> {
        let t = &self.truth;
        let cb = &self.codebook;
        let n: usize = cb.group_sizes().iter().sum();
        let matrices: Vec<ComplexMatrix> = (0..cb.slots()).map(|t| cb.slot_matrix(t)).collect();
        let slots = ComplexTensor::from_fn(&[n, n, cb.slots()], |i| matrices[i[2]][(i[0], i[1])]);
        vec![
            Record::text("config", &self.config_text),
            Record::u64s("master_seed", vec![self.master_seed]),
            Record::u64s("trial_seed", vec![self.trial_seed]),
            Record::f64s("snr_db", vec![self.snr_db]),
            Record::f64s("realized_snr_db", vec![self.realized_snr_db]),
            Record::u64s("noiseless", vec![self.noiseless as u64]),
            Record::f64s(
                "truth",
                vec![
                    t.delay,
                    t.doppler,
                    t.target.azimuth,
                    t.target.elevation,
                    t.transmitter.azimuth,
                    t.transmitter.elevation,
                    t.ris_arrival.azimuth,
                    t.ris_arrival.elevation,
                ],
            ),
            Record { name: "gains".into(), dims: vec![t.gains.len()], payload: Payload::Complex(t.gains.clone()) },
            Record::u64s("group_sizes", cb.group_sizes().iter().map(|&s| s as u64).collect()),
            Record::tensor("codebook", &slots),
            Record::tensor("pilots", self.pilots.tensor()),
            Record::tensor("echo", &self.echo),
        ]
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let records = self.records();
        w.write_all(MAGIC)?;
        w.write_u16::<LE>(VERSION)?;
        w.write_u32::<LE>(records.len() as u32)?;
        records.iter().try_for_each(|r| r.write(w))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write(&mut out)?;
        Ok(out)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let version = r.read_u16::<LE>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let count = r.read_u32::<LE>()?;
        let records: Vec<Record> = (0..count).map(|_| Record::read(r)).collect::<Result<_>>()?;
        Self::from_records(&records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(&mut file)
    }

    fn from_records(records: &[Record]) -> Result<Self> {
        let find = |name: &str| {
            records.iter().find(|r| r.name == name).ok_or_else(|| Error::Format(format!("missing record `{name}`")))
        };
        let text = |name: &str| match &find(name)?.payload {
            Payload::Text(s) => Ok(s.clone()),
            _ => Err(Error::Format(format!("record `{name}` should be text"))),
        };
        let u64s = |name: &str| match &find(name)?.payload {
            Payload::U64(v) => Ok(v.clone()),
            _ => Err(Error::Format(format!("record `{name}` should hold u64 values"))),
        };
        let f64s = |name: &str| match &find(name)?.payload {
            Payload::F64(v) => Ok(v.clone()),
            _ => Err(Error::Format(format!("record `{name}` should hold f64 values"))),
        };
        let tensor = |name: &str| {
            let rec = find(name)?;
            match &rec.payload {
                Payload::Complex(v) => ComplexTensor::new(rec.dims.clone(), v.clone()),
                _ => Err(Error::Format(format!("record `{name}` should hold complex values"))),
            }
        };
        let scalar_u64 = |name: &str| {
            let v = u64s(name)?;
            v.first()
                .copied()
                .filter(|_| v.len() == 1)
                .ok_or_else(|| Error::Format(format!("record `{name}` should hold one value")))
        };
        let scalar_f64 = |name: &str| {
            let v = f64s(name)?;
            v.first()
                .copied()
                .filter(|_| v.len() == 1)
                .ok_or_else(|| Error::Format(format!("record `{name}` should hold one value")))
        };

        let truth_values = f64s("truth")?;
        let [delay, doppler, az, el, tx_az, tx_el, ris_az, ris_el] = truth_values[..] else {
            return Err(Error::Format(format!("record `truth` should hold 8 values, got {}", truth_values.len())));
        };
        let gains = tensor("gains")?.into_data();
        let truth = SceneTruth {
            delay,
            doppler,
            target: Direction::new(az, el),
            transmitter: Direction::new(tx_az, tx_el),
            ris_arrival: Direction::new(ris_az, ris_el),
            gains,
        };

        let group_sizes: Vec<usize> = u64s("group_sizes")?.into_iter().map(|s| s as usize).collect();
        let slots = tensor("codebook")?;
        let n: usize = group_sizes.iter().sum();
        if slots.order() != 3 || slots.shape()[0] != n || slots.shape()[1] != n {
            return Err(Error::Format(format!(
                "codebook of shape {:?} does not match group sizes {group_sizes:?}",
                slots.shape()
            )));
        }
        let matrices: Vec<ComplexMatrix> =
            (0..slots.shape()[2]).map(|t| ComplexMatrix::from_fn(n, n, |i, j| slots.get(&[i, j, t]))).collect();
        let codebook = RisCodebook::from_slot_matrices(group_sizes, &matrices);

        let x = tensor("pilots")?;
        if x.order() != 3 {
            return Err(Error::Format(format!("pilots of shape {:?} are not L x M x Q", x.shape())));
        }
        let pilots = PilotSet::from_matrix(&x.unfold(0)?, x.shape()[1], x.shape()[2])?;

        let noiseless = match scalar_u64("noiseless")? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("noiseless flag must be 0 or 1, got {other}"))),
        };
        Ok(Self {
            config_text: text("config")?,
            master_seed: scalar_u64("master_seed")?,
            trial_seed: scalar_u64("trial_seed")?,
            snr_db: scalar_f64("snr_db")?,
            realized_snr_db: scalar_f64("realized_snr_db")?,
            noiseless,
            truth,
            codebook,
            pilots,
            echo: tensor("echo")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config_to_string;

    fn small_config(seed: u64) -> (SweepConfig, String) {
        let mut cfg = SweepConfig::default();
        cfg.system.t = 12;
        cfg.sweep.seed = seed;
        let text = config_to_string(&cfg).unwrap();
        (cfg, text)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (cfg, text) = small_config(5);
        let ds = Dataset::simulate(&cfg, &text, 12.5).unwrap();
        assert!(!ds.noiseless);
        assert!(ds.realized_snr_db.is_finite());
        let bytes = ds.to_bytes().unwrap();
        let back = Dataset::read(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let bits = |t: &ComplexTensor| -> Vec<(u64, u64)> {
            t.data().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
        };
        assert_eq!(bits(&back.echo), bits(&ds.echo));
    }

    #[test]
    fn file_round_trip() {
        let (cfg, text) = small_config(6);
        let ds = Dataset::simulate(&cfg, &text, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.bds");
        ds.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), ds);
        assert_eq!(Dataset::load(&path).unwrap().config().unwrap(), cfg);
    }

    #[test]
    fn seeds_change_the_echo() {
        let (a_cfg, a_text) = small_config(1);
        let (b_cfg, b_text) = small_config(2);
        let a = Dataset::simulate(&a_cfg, &a_text, 10.0).unwrap();
        let b = Dataset::simulate(&b_cfg, &b_text, 10.0).unwrap();
        assert_ne!(a.echo, b.echo);
        assert_ne!(a.trial_seed, b.trial_seed);
    }

    #[test]
    fn noiseless_flag() {
        let (cfg, text) = small_config(3);
        let ds = Dataset::simulate(&cfg, &text, f64::INFINITY).unwrap();
        assert!(ds.noiseless);
        assert_eq!(ds.realized_snr_db, f64::INFINITY);
        assert_eq!(ds.echo, ds.trial_scene(&cfg).unwrap().clean);
        let back = Dataset::read(&mut ds.to_bytes().unwrap().as_slice()).unwrap();
        assert!(back.noiseless);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (cfg, text) = small_config(4);
        let bytes = Dataset::simulate(&cfg, &text, 10.0).unwrap().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Dataset::read(&mut bad.as_slice()), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Dataset::read(&mut bad.as_slice()), Err(Error::Format(_))));
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(Dataset::read(&mut &truncated[..]), Err(Error::Io(_))));
    }

    #[test]
    fn missing_record_is_named() {
        let (cfg, text) = small_config(4);
        let ds = Dataset::simulate(&cfg, &text, 10.0).unwrap();
        let records: Vec<Record> = ds.records().into_iter().filter(|r| r.name != "pilots").collect();
        let err = Dataset::from_records(&records).unwrap_err().to_string();
        assert!(err.contains("pilots"), "{err}");
    }
}
