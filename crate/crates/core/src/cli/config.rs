//! Run configuration: flat `section.key = value` lines.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown or repeated keys are errors. Command-line `--set`
//! overrides are applied after the file.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use crate::autoencoders::{Architecture, ExtractorSpec, TrainConfig};
use crate::pipeline::{ThresholdConfig, TransferConfig};
use crate::sim::{DatasetSpec, SubsetKind};
use crate::transfer::MixPolicy;
use crate::{Error, Result, RngSeed};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for data-parallel loops and sweep jobs; 0 lets rayon decide.
    pub jobs: usize,
    pub parallel: bool,
    pub out: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub extractor_path: Option<PathBuf>,
    pub detector_path: Option<PathBuf>,
    pub db_path: Option<PathBuf>,
    pub data: DatasetSpec,
    pub new_product_samples: usize,
    pub extractor: ExtractorSpec,
    pub extractor_train: TrainConfig,
    pub detector_train: TrainConfig,
    pub subset: SubsetKind,
    pub baseline_layers: Vec<usize>,
    pub thresholds: ThresholdConfig,
    pub policy: MixPolicy,
    /// Per-task retention budget; 0 keeps every record.
    pub budget: usize,
    pub sensor: String,
    pub sweep_architectures: Vec<Architecture>,
    pub sweep_code_sizes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            jobs: 0,
            parallel: true,
            out: PathBuf::from("out"),
            data_dir: None,
            extractor_path: None,
            detector_path: None,
            db_path: None,
            data: DatasetSpec::default(),
            new_product_samples: 50,
            extractor: ExtractorSpec::new(Architecture::Cnn, 300, 16),
            extractor_train: TrainConfig::default(),
            detector_train: TrainConfig::default(),
            subset: SubsetKind::Normal,
            baseline_layers: vec![1, 2, 3],
            thresholds: ThresholdConfig::default(),
            policy: MixPolicy::default(),
            budget: 0,
            sensor: "pressure".into(),
            sweep_architectures: Architecture::ALL.to_vec(),
            sweep_code_sizes: vec![16, 32, 48],
        }
    }
}

/// Text form of one config value.
trait ConfigValue: Sized {
    fn parse(s: &str) -> Result<Self>;
    fn render(&self) -> String;
}

fn bad(s: &str, what: &str) -> Error {
    Error::config(format!("{s:?} is not {what}"))
}

macro_rules! display_value {
    ($($t:ty => $what:literal),*) => {$(
        impl ConfigValue for $t {
            fn parse(s: &str) -> Result<Self> {
                s.parse().map_err(|_| bad(s, $what))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(u64 => "an unsigned integer", usize => "an unsigned integer", f64 => "a number", bool => "true or false");

impl ConfigValue for String {
    fn parse(s: &str) -> Result<Self> {
        Ok(s.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for PathBuf {
    fn parse(s: &str) -> Result<Self> {
        Ok(PathBuf::from(s))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

/// Empty means "derive from `paths.out`".
impl ConfigValue for Option<PathBuf> {
    fn parse(s: &str) -> Result<Self> {
        Ok((!s.is_empty()).then(|| PathBuf::from(s)))
    }
    fn render(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

impl ConfigValue for Architecture {
    fn parse(s: &str) -> Result<Self> {
        s.parse()
    }
    fn render(&self) -> String {
        self.name().into()
    }
}

impl ConfigValue for SubsetKind {
    fn parse(s: &str) -> Result<Self> {
        s.parse()
    }
    fn render(&self) -> String {
        self.name().into()
    }
}

fn parse_list<T: ConfigValue>(s: &str) -> Result<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',').map(|p| T::parse(p.trim())).collect()
}

fn render_list<T: ConfigValue>(v: &[T]) -> String {
    v.iter().map(T::render).collect::<Vec<_>>().join(",")
}

impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn parse(s: &str) -> Result<Self> {
        parse_list(s)
    }
    fn render(&self) -> String {
        render_list(self)
    }
}

impl ConfigValue for (f64, f64) {
    fn parse(s: &str) -> Result<Self> {
        match parse_list::<f64>(s)?[..] {
            [a, b] => Ok((a, b)),
            _ => Err(bad(s, "a pair 'low,high'")),
        }
    }
    fn render(&self) -> String {
        format!("{},{}", self.0, self.1)
    }
}

impl ConfigValue for [f64; 3] {
    fn parse(s: &str) -> Result<Self> {
        parse_list::<f64>(s)?.try_into().map_err(|_| bad(s, "three comma-separated numbers"))
    }
    fn render(&self) -> String {
        render_list(self)
    }
}

macro_rules! config_keys {
    ($($key:literal => |$c:ident| $place:expr, $doc:literal;)*) => {
        /// Every accepted key with its description, in echo order.
        pub const KEYS: &[(&str, &str)] = &[$(($key, $doc)),*];

        impl RunConfig {
            /// Parses and assigns one key.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        let $c = &mut *self;
                        $place = ConfigValue::parse(value).map_err(|e| Error::config(format!("{key}: {e}")))?;
                    })*
                    _ => return Err(Error::config(format!("unknown key {key:?}"))),
                }
                Ok(())
            }

            /// `(key, value)` for every key, in [`KEYS`] order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, { let $c = self; ConfigValue::render(&$place) })),*]
            }
        }
    };
}

config_keys! {
    "run.seed" => |c| c.seed, "master seed for data, initialisation and batch order";
    "run.jobs" => |c| c.jobs, "worker threads (0: one per core)";
    "run.parallel" => |c| c.parallel, "false forces sequential loops";
    "paths.out" => |c| c.out, "output directory";
    "paths.data" => |c| c.data_dir, "dataset directory (empty: <out>/data)";
    "paths.extractor" => |c| c.extractor_path, "extractor bundle (empty: <out>/extractor.bundle)";
    "paths.detector" => |c| c.detector_path, "detector bundle (empty: <out>/detector.bundle)";
    "paths.db" => |c| c.db_path, "representation database (empty: <out>/db.jsonl)";
    "data.length" => |c| c.data.event.length, "samples per series";
    "data.train_products" => |c| c.data.train_products, "products seen in training";
    "data.test_products" => |c| c.data.test_products, "unseen products in the test part";
    "data.extractor_samples" => |c| c.data.extractor_samples, "normal events for extractor training";
    "data.normal_samples" => |c| c.data.normal_samples, "size of the normal subset";
    "data.mixed_samples" => |c| c.data.mixed_samples, "size of the mixed subset (normal subset plus anomalous events)";
    "data.test_samples" => |c| c.data.test_samples, "test events";
    "data.test_proportions" => |c| c.data.test_proportions, "normal,anomalous,defect shares of the test part";
    "data.new_product_samples" => |c| c.new_product_samples, "normal events of the extra product used for transfer";
    "data.event_jitter" => |c| c.data.event.event_jitter, "relative event-to-event variation";
    "data.dip_depth" => |c| c.data.event.dip_depth, "anomalous dip depth range (fraction of peak)";
    "data.dip_width" => |c| c.data.event.dip_width, "anomalous dip width range (fraction of length)";
    "data.slope_deviation" => |c| c.data.event.slope_deviation, "anomalous pressure loss over the hold phase";
    "data.compensation_gain" => |c| c.data.event.compensation_gain, "share of missing pressure taken over by other pumps";
    "data.overload_ripple" => |c| c.data.event.overload_ripple, "reservoir ripple per missing pump";
    "filter.min_correlation" => |c| c.data.filter.min_correlation, "pumps below this correlation with the consensus are excluded";
    "filter.min_range_ratio" => |c| c.data.filter.min_range_ratio, "pumps below this share of the consensus range are excluded";
    "extractor.architecture" => |c| c.extractor.architecture, "lstm, cnn or fc";
    "extractor.code_size" => |c| c.extractor.code_size, "code length";
    "extractor.frame_width" => |c| c.extractor.frame_width, "lstm values per time step";
    "extractor.batch_size" => |c| c.extractor_train.batch_size, "mini-batch size";
    "extractor.max_epochs" => |c| c.extractor_train.max_epochs, "training epochs";
    "extractor.learning_rate" => |c| c.extractor_train.learning_rate, "Adam step size";
    "detector.subset" => |c| c.subset, "mixed, normal or normal_x5";
    "detector.batch_size" => |c| c.detector_train.batch_size, "mini-batch size (also used by baselines)";
    "detector.max_epochs" => |c| c.detector_train.max_epochs, "training epochs (also used by baselines)";
    "detector.learning_rate" => |c| c.detector_train.learning_rate, "Adam step size (also used by baselines)";
    "baseline.layers" => |c| c.baseline_layers, "encoder depths of the conventional baselines";
    "threshold.percentile" => |c| c.thresholds.percentile, "nearest-rank percentile of normal errors giving tau";
    "threshold.defect_multiplier" => |c| c.thresholds.defect_multiplier, "tau_def = multiplier * tau";
    "transfer.k_tasks" => |c| c.policy.k_tasks, "similar tasks to borrow from";
    "transfer.mix_ratio" => |c| c.policy.mix_ratio, "borrowed share of a composed set, below 1";
    "transfer.budget" => |c| c.budget, "records kept per task by retention (0: all)";
    "transfer.sensor" => |c| c.sensor, "sensor tag stored with inserted records";
    "sweep.architectures" => |c| c.sweep_architectures, "architectures of sweep runs";
    "sweep.code_sizes" => |c| c.sweep_code_sizes, "code sizes of sweep runs";
}

impl RunConfig {
    /// Defaults overlaid with `text`; `origin` only labels errors.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::parse(origin, i + 1, msg);
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(format!("expected 'section.key = value', got {line:?}")));
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key {key:?} is set twice")));
            }
            self.set(key, value.trim()).map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
        Self::from_text(&text, path)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {assignment:?} must look like key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.extractor_spec().validate()?;
        for (name, t) in [("extractor", &self.extractor_train), ("detector", &self.detector_train)] {
            if t.batch_size == 0 || t.max_epochs == 0 {
                return Err(Error::config(format!("{name}.batch_size and {name}.max_epochs must be at least 1")));
            }
            if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
                return Err(Error::config(format!("{name}.learning_rate must be positive")));
            }
        }
        self.thresholds.validate()?;
        self.policy.validate()?;
        if self.baseline_layers.iter().any(|&l| !(1..=3).contains(&l)) {
            return Err(Error::config("baseline.layers entries must lie in 1..=3"));
        }
        if self.sweep_code_sizes.contains(&0) {
            return Err(Error::config("sweep.code_sizes must be positive"));
        }
        Ok(())
    }

    /// Canonical file form; parsing it back gives the same config.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        self.entries().into_iter().collect()
    }

    pub fn exec_mode(&self) -> crate::par::ExecMode {
        if self.parallel {
            crate::par::ExecMode::Parallel
        } else {
            crate::par::ExecMode::Sequential
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            seed: RngSeed(self.seed),
            ..self.data.clone()
        }
    }

    /// The extractor spec with its input length taken from `data.length`.
    pub fn extractor_spec(&self) -> ExtractorSpec {
        ExtractorSpec {
            input_length: self.data.event.length,
            ..self.extractor
        }
    }

    pub fn extractor_train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: RngSeed(self.seed),
            ..self.extractor_train
        }
    }

    pub fn detector_train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: RngSeed(self.seed),
            ..self.detector_train
        }
    }

    pub fn transfer_config(&self) -> TransferConfig {
        TransferConfig {
            policy: self.policy,
            budget: (self.budget > 0).then_some(self.budget),
            seed: RngSeed(self.seed),
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| self.out.join("data"))
    }

    pub fn extractor_path(&self) -> PathBuf {
        self.extractor_path.clone().unwrap_or_else(|| self.out.join("extractor.bundle"))
    }

    pub fn detector_path(&self) -> PathBuf {
        self.detector_path.clone().unwrap_or_else(|| self.out.join("detector.bundle"))
    }

    /// Calibrated thresholds stored next to the detector bundle.
    pub fn thresholds_path(&self) -> PathBuf {
        self.detector_path().with_extension("thresholds.json")
    }

    pub fn db_path(&self) -> PathBuf {
        self.db_path.clone().unwrap_or_else(|| self.out.join("db.jsonl"))
    }

    pub fn metrics_dir(&self) -> PathBuf {
        self.out.join("metrics")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_text(&cfg.to_text(), Path::new("x")).unwrap(), cfg);
        assert_eq!(cfg.entries().len(), KEYS.len());
    }

    #[test]
    fn file_values_and_overrides_apply() {
        let text = "# desk\n\nrun.seed = 7\nextractor.architecture = fc\ndata.dip_depth = 0.5, 0.9\nbaseline.layers = 2\npaths.db =\n";
        let mut cfg = RunConfig::from_text(text, Path::new("x")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.extractor.architecture, Architecture::Fc);
        assert_eq!(cfg.data.event.dip_depth, (0.5, 0.9));
        assert_eq!(cfg.baseline_layers, vec![2]);
        cfg.apply_override("run.seed=9").unwrap();
        assert_eq!(cfg.seed, 9);
        let back = RunConfig::from_text(&cfg.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_repeated_and_malformed_keys_fail_with_line() {
        let p = Path::new("x");
        assert_eq!(line_of(RunConfig::from_text("run.seed = 1\nrun.sed = 2\n", p).unwrap_err()), 2);
        assert_eq!(line_of(RunConfig::from_text("run.seed = 1\nrun.seed = 2\n", p).unwrap_err()), 2);
        assert_eq!(line_of(RunConfig::from_text("\nrun.seed 1\n", p).unwrap_err()), 2);
        assert_eq!(line_of(RunConfig::from_text("run.seed = x\n", p).unwrap_err()), 1);
        assert!(RunConfig::default().apply_override("nope=1").is_err());
        assert!(RunConfig::default().apply_override("run.seed").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = RunConfig::default();
        c.set("data.test_proportions", "0.5,0.3,0.3").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("transfer.mix_ratio", "1").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("extractor.architecture", "lstm").unwrap();
        c.set("data.length", "205").unwrap(); // not a multiple of the lstm frame
        assert!(c.validate().is_err());
        assert!(RunConfig::default().set("detector.subset", "all").is_err());
    }
}
