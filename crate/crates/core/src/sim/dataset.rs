use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::event::{conditions_for, synth_event, EventParams};
use super::filter::{average_event, exclude_defect_pumps, FilterConfig};
use rand::Rng;

use super::profile::{blend_products, product_family, variant_of, ProductProfile};
use super::{Label, LabeledSample};
use crate::par::{self, ExecMode};
use crate::{Error, Result, RngSeed};

/// Test-split class proportions (normal, anomalous, defect).
pub const PAPER_TEST_PROPORTIONS: [f64; 3] = [0.574, 0.178, 0.248];
pub const PAPER_NORMAL_COUNT: usize = 5073;
pub const PAPER_MIXED_COUNT: usize = 10159;
pub const PAPER_TEST_COUNT: usize = 3384;
pub const NORMAL_X5_COPIES: usize = 5;

const BASE_TIMESTAMP: i64 = 1_600_000_000;
const EVENT_SPACING_SECS: i64 = 120;
/// Event ids of the dataset parts live in disjoint blocks, so resizing one
/// part never changes the events of another.
const ID_BLOCK: u64 = 10_000_000;
const MAX_ATTEMPTS: u64 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: RngSeed,
    pub event: EventParams,
    pub filter: FilterConfig,
    pub train_products: usize,
    pub test_products: usize,
    /// Normal events for extractor pre-training.
    pub extractor_samples: usize,
    /// Size of the Normal training subset.
    pub normal_samples: usize,
    /// Size of the Mixed subset: the Normal subset plus anomalous events.
    pub mixed_samples: usize,
    pub test_samples: usize,
    pub test_proportions: [f64; 3],
}

impl Default for DatasetSpec {
    /// Desk scale: length 300 and a tenth of the paper's sample counts.
    fn default() -> Self {
        DatasetSpec {
            seed: RngSeed(1),
            event: EventParams::default(),
            filter: FilterConfig::default(),
            train_products: 9,
            test_products: 3,
            extractor_samples: 2000,
            normal_samples: PAPER_NORMAL_COUNT / 10,
            mixed_samples: PAPER_MIXED_COUNT / 10 + 1,
            test_samples: PAPER_TEST_COUNT / 10,
            test_proportions: PAPER_TEST_PROPORTIONS,
        }
    }
}

impl DatasetSpec {
    pub fn paper_scale() -> Self {
        DatasetSpec {
            event: EventParams { length: 3000, ..EventParams::default() },
            extractor_samples: 20_000,
            normal_samples: PAPER_NORMAL_COUNT,
            mixed_samples: PAPER_MIXED_COUNT,
            test_samples: PAPER_TEST_COUNT,
            ..DatasetSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.event.validate()?;
        if self.train_products == 0 || self.test_products == 0 {
            return Err(Error::config("need at least one training and one test product"));
        }
        if self.test_proportions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("test proportions must lie in [0, 1]"));
        }
        let sum: f64 = self.test_proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("test proportions sum to {sum}, expected 1")));
        }
        if self.mixed_samples < self.normal_samples {
            return Err(Error::config(format!(
                "mixed subset ({}) must contain the normal subset ({})",
                self.mixed_samples, self.normal_samples
            )));
        }
        if self.normal_samples == 0 || self.extractor_samples == 0 || self.test_samples == 0 {
            return Err(Error::config("sample counts must be positive"));
        }
        Ok(())
    }

    /// Per-class test counts by largest-remainder rounding.
    pub fn test_counts(&self) -> [usize; 3] {
        let c = largest_remainder(&self.test_proportions, self.test_samples);
        [c[0], c[1], c[2]]
    }

    /// Training products are drawn from the seeded family; each test product
    /// is a random convex blend of the training products, so it is unseen
    /// but lies inside the family the models were trained on.
    pub fn products(&self) -> (Vec<ProductProfile>, Vec<ProductProfile>) {
        let train = product_family(self.seed, self.train_products);
        let test = (0..self.test_products)
            .map(|i| {
                let id = format!("P{:02}", self.train_products + i);
                let mut rng = self.seed.derive_named("blend").derive(i as u64).rng();
                blend_products(&train, &mut rng, id)
            })
            .collect();
        (train, test)
    }
}

/// Splits `total` into integer shares proportional to `weights`, handing the
/// leftover units to the largest fractional parts (lower index on ties).
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetKind {
    Mixed,
    Normal,
    NormalX5,
}

impl SubsetKind {
    pub const ALL: [SubsetKind; 3] = [SubsetKind::Mixed, SubsetKind::Normal, SubsetKind::NormalX5];

    pub fn name(self) -> &'static str {
        match self {
            SubsetKind::Mixed => "mixed",
            SubsetKind::Normal => "normal",
            SubsetKind::NormalX5 => "normal_x5",
        }
    }

    /// Row label used in the accuracy tables.
    pub fn table_name(self) -> &'static str {
        match self {
            SubsetKind::Mixed => "Mixed",
            SubsetKind::Normal => "Normal",
            SubsetKind::NormalX5 => "Normal * 5",
        }
    }
}

impl fmt::Display for SubsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubsetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SubsetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown subset {s:?} (expected mixed, normal or normal_x5)")))
    }
}

/// Everything one experiment needs. Training parts come from the training
/// products only; the test part comes from the disjoint test products.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train_products: Vec<ProductProfile>,
    pub test_products: Vec<ProductProfile>,
    pub extractor_train: Vec<LabeledSample>,
    pub normal: Vec<LabeledSample>,
    pub anomalous: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

impl DatasetSplit {
    pub fn subset(&self, kind: SubsetKind) -> Vec<LabeledSample> {
        compose_subset(kind, &self.normal, &self.anomalous)
    }
}

/// A training subset from its normal and anomalous parts.
pub fn compose_subset(kind: SubsetKind, normal: &[LabeledSample], anomalous: &[LabeledSample]) -> Vec<LabeledSample> {
    match kind {
        SubsetKind::Normal => normal.to_vec(),
        SubsetKind::Mixed => normal.iter().chain(anomalous).cloned().collect(),
        SubsetKind::NormalX5 => (0..NORMAL_X5_COPIES).flat_map(|_| normal.iter().cloned()).collect(),
    }
}

/// Simulates one averaged sample of `class` per entry, cycling through
/// `products`. An event whose filtered label differs from the requested class
/// is redrawn from the next sub-seed.
pub fn generate_samples(
    spec: &DatasetSpec,
    products: &[ProductProfile],
    classes: &[Label],
    first_event_id: u64,
    mode: ExecMode,
) -> Result<Vec<LabeledSample>> {
    if products.is_empty() {
        return Err(Error::config("no products to simulate"));
    }
    let events = spec.seed.derive_named("event");
    let results = par::map_range(mode, classes.len(), |i| -> Result<LabeledSample> {
        let id = first_event_id + i as u64;
        let class = classes[i];
        let product = &products[i % products.len()];
        let timestamp = BASE_TIMESTAMP + id as i64 * EVENT_SPACING_SECS;
        for attempt in 0..MAX_ATTEMPTS {
            let seed = events.derive(id).derive(attempt);
            let cond = conditions_for(class, &mut seed.derive_named("conditions").rng());
            let ev = synth_event(id, product, &cond, &spec.event, seed)?;
            let f = exclude_defect_pumps(&ev.channels, &spec.filter)?;
            let s = average_event(&ev, &f, timestamp)?;
            if s.label == class {
                return Ok(s);
            }
        }
        Err(Error::invalid(format!(
            "event {id}: no {class} sample after {MAX_ATTEMPTS} attempts; check the filter thresholds"
        )))
    });
    results.into_iter().collect()
}

pub fn make_dataset(spec: &DatasetSpec, mode: ExecMode) -> Result<DatasetSplit> {
    spec.validate()?;
    let (train_products, test_products) = spec.products();
    let [tn, ta, td] = spec.test_counts();
    let test_classes: Vec<Label> = [(Label::Normal, tn), (Label::Anomalous, ta), (Label::Defect, td)]
        .iter()
        .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
        .collect();
    Ok(DatasetSplit {
        extractor_train: generate_samples(spec, &train_products, &vec![Label::Normal; spec.extractor_samples], 0, mode)?,
        normal: generate_samples(spec, &train_products, &vec![Label::Normal; spec.normal_samples], ID_BLOCK, mode)?,
        anomalous: generate_samples(
            spec,
            &train_products,
            &vec![Label::Anomalous; spec.mixed_samples - spec.normal_samples],
            2 * ID_BLOCK,
            mode,
        )?,
        test: generate_samples(spec, &test_products, &test_classes, 3 * ID_BLOCK, mode)?,
        train_products,
        test_products,
    })
}

/// First event id of the block reserved for ad-hoc generation (e.g. the
/// transfer experiment's new product).
pub const EXTRA_ID_BLOCK: u64 = 4 * ID_BLOCK;

/// A product that appears after the extractor was trained.
#[derive(Clone, Debug, PartialEq)]
pub struct NewProduct {
    pub profile: ProductProfile,
    /// Id of the training product the variant derives from.
    pub parent: String,
    /// Normal events available for retraining.
    pub train: Vec<LabeledSample>,
    /// Three-class test events in the spec's test proportions.
    pub test: Vec<LabeledSample>,
}

/// Weight of the parent product in [`new_product`].
pub const VARIANT_SHARE: f64 = 0.8;

/// A variant of one randomly chosen training product (see
/// [`variant_of`](super::profile::variant_of)) with `train_normals` normal
/// events and a test part of `spec.test_samples` events.
pub fn new_product(spec: &DatasetSpec, train_normals: usize, mode: ExecMode) -> Result<NewProduct> {
    spec.validate()?;
    let (train_products, _) = spec.products();
    let index = spec.test_products;
    let mut rng = spec.seed.derive_named("variant").rng();
    let dominant = rng.random_range(0..train_products.len());
    let profile = variant_of(&train_products, dominant, VARIANT_SHARE, &mut rng, format!("P{:02}", spec.train_products + index));
    let [tn, ta, td] = spec.test_counts();
    let test_classes: Vec<Label> = [(Label::Normal, tn), (Label::Anomalous, ta), (Label::Defect, td)]
        .iter()
        .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
        .collect();
    let one = std::slice::from_ref(&profile);
    Ok(NewProduct {
        train: generate_samples(spec, one, &vec![Label::Normal; train_normals], EXTRA_ID_BLOCK, mode)?,
        test: generate_samples(spec, one, &test_classes, EXTRA_ID_BLOCK + ID_BLOCK / 2, mode)?,
        parent: train_products[dominant].product_id.clone(),
        profile,
    })
}
