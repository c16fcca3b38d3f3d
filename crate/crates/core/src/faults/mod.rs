//! IEEE-754 binary32 bit-flip injection.
//!
//! Flips follow a fixed direction per field: sign bits go 0→1, exponent and
//! mantissa bits go 1→0. Every flip is logged as a [`BitFlip`]; because a flip
//! is an XOR, applying a [`FlipRecord`] twice restores the original weights.

mod planner;

pub use planner::{
    plan_relu_sign_attack, plan_targeted_graph_attack, plan_targeted_node_attack, AttackPlan,
    GraphAttackPlan, PlanOutcome,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{GnnModel, LayerId};

/// Bit width `b` of the weight format.
pub const WEIGHT_BITS: u32 = 32;

pub const SIGN_BIT: u8 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BitField {
    Sign,
    Exponent,
    Mantissa,
}

impl BitField {
    pub const ALL: [BitField; 3] = [BitField::Sign, BitField::Exponent, BitField::Mantissa];

    /// Bit positions of the field, most significant first.
    pub fn bits(self) -> impl Iterator<Item = u8> {
        let (hi, lo) = match self {
            BitField::Sign => (31u8, 31u8),
            BitField::Exponent => (30, 23),
            BitField::Mantissa => (22, 0),
        };
        (lo..=hi).rev()
    }

    pub fn of_bit(bit: u8) -> Option<BitField> {
        match bit {
            31 => Some(BitField::Sign),
            23..=30 => Some(BitField::Exponent),
            0..=22 => Some(BitField::Mantissa),
            _ => None,
        }
    }

    /// Bit value a position must hold to be flipped in this field's direction.
    pub fn eligible_value(self) -> u8 {
        match self {
            BitField::Sign => 0,
            BitField::Exponent | BitField::Mantissa => 1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BitField::Sign => 0,
            BitField::Exponent => 1,
            BitField::Mantissa => 2,
        }
    }
}

impl fmt::Display for BitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitField::Sign => "sign",
            BitField::Exponent => "exponent",
            BitField::Mantissa => "mantissa",
        })
    }
}

impl FromStr for BitField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sign" => Ok(BitField::Sign),
            "exponent" => Ok(BitField::Exponent),
            "mantissa" => Ok(BitField::Mantissa),
            other => Err(Error::Config(format!("unknown bit field '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitAddress {
    pub layer: LayerId,
    pub row: usize,
    pub col: usize,
    pub bit: u8,
}

impl BitAddress {
    pub fn field(&self) -> BitField {
        BitField::of_bit(self.bit).expect("bit < 32")
    }
}

/// The weights a plan targets: one stage `(j, i)` or every stage of MLP `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlipTarget {
    Mlp(usize),
    Stage(LayerId),
}

impl FlipTarget {
    pub fn stages(&self, model: &GnnModel) -> Result<Vec<LayerId>> {
        match *self {
            FlipTarget::Mlp(j) => model.stages_of(j),
            FlipTarget::Stage(id) => model.stage(id).map(|_| vec![id]),
        }
    }

    pub fn mp_layer(&self) -> usize {
        match *self {
            FlipTarget::Mlp(j) => j,
            FlipTarget::Stage(id) => id.mp,
        }
    }
}

impl fmt::Display for FlipTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlipTarget::Mlp(j) => write!(f, "{j}"),
            FlipTarget::Stage(id) => write!(f, "{}.{}", id.mp, id.stage),
        }
    }
}

impl FromStr for FlipTarget {
    type Err = Error;

    /// `"j"` targets the whole MLP of layer `j`, `"j.i"` a single stage.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid layer target '{s}'"));
        let mut parts = s.trim().split('.');
        let j: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let target = match parts.next() {
            None => FlipTarget::Mlp(j),
            Some(i) => FlipTarget::Stage(LayerId::new(j, i.parse().map_err(|_| bad())?)),
        };
        if parts.next().is_some() || j == 0 {
            return Err(bad());
        }
        Ok(target)
    }
}

/// Which bits the flip fraction is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FlipPopulation {
    /// Only bits whose current value allows a flip in the field's direction.
    #[default]
    Eligible,
    /// Every bit of the field; sampled bits that are already in the target state stay unchanged.
    FieldBits,
}

impl fmt::Display for FlipPopulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlipPopulation::Eligible => "eligible",
            FlipPopulation::FieldBits => "field",
        })
    }
}

impl FromStr for FlipPopulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eligible" => Ok(FlipPopulation::Eligible),
            "field" | "all" => Ok(FlipPopulation::FieldBits),
            other => Err(Error::Config(format!("unknown flip population '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipPlan {
    pub target: FlipTarget,
    pub field: BitField,
    pub fraction: f64,
    pub population: FlipPopulation,
    pub seed: u64,
}

impl FlipPlan {
    pub fn new(target: FlipTarget, field: BitField, fraction: f64, seed: u64) -> Self {
        FlipPlan {
            target,
            field,
            fraction,
            population: FlipPopulation::Eligible,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitFlip {
    pub address: BitAddress,
    pub before: u8,
    pub after: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlipRecord {
    pub flips: Vec<BitFlip>,
    /// Size of the population the fraction was taken from.
    pub eligible_count: usize,
    pub applied_count: usize,
}

impl FlipRecord {
    pub fn from_flips(flips: Vec<BitFlip>) -> Self {
        FlipRecord {
            eligible_count: flips.len(),
            applied_count: flips.len(),
            flips,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    /// Toggles every recorded bit. Applying the same record again undoes it.
    pub fn apply(&self, model: &mut GnnModel) -> Result<()> {
        for flip in &self.flips {
            toggle(model, flip.address)?;
        }
        Ok(())
    }

    /// True if every recorded `before` bit matches the model's current state.
    pub fn matches_before(&self, model: &GnnModel) -> Result<bool> {
        for flip in &self.flips {
            if read_bit(model, flip.address)? != flip.before {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One `j,i,row,col,bit,before,after` line per flip, preceded by a count comment.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# eligible={} applied={}\n",
            self.eligible_count, self.applied_count
        );
        for f in &self.flips {
            let a = f.address;
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                a.layer.mp, a.layer.stage, a.row, a.col, a.bit, f.before, f.after
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut record = FlipRecord::default();
        let mut counts = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut eligible = None;
                let mut applied = None;
                for kv in rest.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("eligible", v)) => eligible = v.parse().ok(),
                        Some(("applied", v)) => applied = v.parse().ok(),
                        _ => {}
                    }
                }
                if let (Some(e), Some(a)) = (eligible, applied) {
                    counts = Some((e, a));
                }
                continue;
            }
            let err = |m: &str| Error::format("flip record", i + 1, m.to_string());
            let fields: Vec<usize> = line
                .split(',')
                .map(|f| f.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err("expected 7 unsigned integers"))?;
            let [mp, stage, row, col, bit, before, after] = fields[..] else {
                return Err(err("expected 7 fields"));
            };
            if bit >= 32 || before > 1 || after > 1 || before == after {
                return Err(err("bit must be < 32 and before/after distinct bits"));
            }
            record.flips.push(BitFlip {
                address: BitAddress {
                    layer: LayerId::new(mp, stage),
                    row,
                    col,
                    bit: bit as u8,
                },
                before: before as u8,
                after: after as u8,
            });
        }
        let (e, a) = counts.unwrap_or((record.flips.len(), record.flips.len()));
        record.eligible_count = e;
        record.applied_count = a;
        Ok(record)
    }
}

fn check_address(model: &GnnModel, a: BitAddress) -> Result<()> {
    let w = model.weights(a.layer).map_err(|_| Error::Address(format!("no layer {}", a.layer)))?;
    if a.row >= w.rows() || a.col >= w.cols() || a.bit >= 32 {
        return Err(Error::Address(format!(
            "({}, {}) bit {} outside {} of shape {}x{}",
            a.row,
            a.col,
            a.bit,
            a.layer,
            w.rows(),
            w.cols()
        )));
    }
    Ok(())
}

pub fn read_bit(model: &GnnModel, a: BitAddress) -> Result<u8> {
    check_address(model, a)?;
    let w = model.weights(a.layer)?.get(a.row, a.col);
    Ok(((w.to_bits() >> a.bit) & 1) as u8)
}

fn toggle(model: &mut GnnModel, a: BitAddress) -> Result<()> {
    check_address(model, a)?;
    let w = model.weights_mut(a.layer)?;
    let bits = w.get(a.row, a.col).to_bits() ^ (1u32 << a.bit);
    w.set(a.row, a.col, f32::from_bits(bits));
    Ok(())
}

/// Bits of `field` in the target weights that can be flipped in the field's direction.
///
/// Ordered by stage, then row-major over weights, then bit-descending.
pub fn eligible_bits(model: &GnnModel, target: FlipTarget, field: BitField) -> Result<Vec<BitAddress>> {
    field_bits(model, target, field, true)
}

fn field_bits(
    model: &GnnModel,
    target: FlipTarget,
    field: BitField,
    only_eligible: bool,
) -> Result<Vec<BitAddress>> {
    let stages = target
        .stages(model)
        .map_err(|_| Error::Address(format!("no layer {target}")))?;
    let want = field.eligible_value() as u32;
    let mut out = Vec::new();
    for layer in stages {
        let w = model.weights(layer)?;
        for row in 0..w.rows() {
            for col in 0..w.cols() {
                let bits = w.get(row, col).to_bits();
                for bit in field.bits() {
                    if !only_eligible || (bits >> bit) & 1 == want {
                        out.push(BitAddress {
                            layer,
                            row,
                            col,
                            bit,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `ceil(fraction · population)`, capped at the population.
///
/// Products within 1e-9 of an integer are taken as that integer, so binary
/// noise such as `0.1 · 30 = 3.0000000000000004` does not add a flip.
pub fn flip_count(fraction: f64, population: usize) -> usize {
    let exact = fraction * population as f64;
    let n = (exact - 1e-9).ceil().max(0.0) as usize;
    n.min(population)
}

/// Samples `flip_count(fraction, population)` addresses without replacement and flips them.
pub fn inject_random(model: &mut GnnModel, plan: &FlipPlan) -> Result<FlipRecord> {
    if !(plan.fraction > 0.0 && plan.fraction <= 1.0) {
        return Err(Error::Config(format!(
            "flip fraction {} outside (0, 1]",
            plan.fraction
        )));
    }
    let only_eligible = plan.population == FlipPopulation::Eligible;
    let population = field_bits(model, plan.target, plan.field, only_eligible)?;
    let count = flip_count(plan.fraction, population.len());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut picked = index::sample(&mut rng, population.len(), count).into_vec();
    picked.sort_unstable();
    let want = plan.field.eligible_value();
    let mut flips = Vec::with_capacity(count);
    for i in picked {
        let address = population[i];
        let before = read_bit(model, address)?;
        if before != want {
            // only reachable with FlipPopulation::FieldBits
            continue;
        }
        toggle(model, address)?;
        flips.push(BitFlip {
            address,
            before,
            after: 1 - before,
        });
    }
    Ok(FlipRecord {
        applied_count: flips.len(),
        eligible_count: population.len(),
        flips,
    })
}

/// Flips that would turn the weight into `+0.0`: one per set bit.
pub fn zero_weight_flips(model: &GnnModel, layer: LayerId, row: usize, col: usize) -> Result<Vec<BitFlip>> {
    check_address(
        model,
        BitAddress {
            layer,
            row,
            col,
            bit: 0,
        },
    )?;
    let bits = model.weights(layer)?.get(row, col).to_bits();
    Ok((0..32u8)
        .rev()
        .filter(|b| (bits >> b) & 1 == 1)
        .map(|bit| BitFlip {
            address: BitAddress {
                layer,
                row,
                col,
                bit,
            },
            before: 1,
            after: 0,
        })
        .collect())
}

/// Sets the weight to `+0.0` and returns the number of bits flipped (its popcount).
pub fn zero_weight(model: &mut GnnModel, layer: LayerId, row: usize, col: usize) -> Result<u32> {
    let flips = zero_weight_flips(model, layer, row, col)?;
    let count = flips.len() as u32;
    FlipRecord::from_flips(flips).apply(model)?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_model, Activation, Architecture};
    use proptest::prelude::*;

    fn one_weight(value: f32) -> GnnModel {
        let mut m = init_model(Architecture::Gin, 1, 1, 1, Activation::Relu, 0)
            .unwrap();
        m.layers[0].mlp.truncate(1);
        m.weights_mut(LayerId::new(1, 1)).unwrap().set(0, 0, value);
        m
    }

    const L11: LayerId = LayerId { mp: 1, stage: 1 };

    fn count(m: &GnnModel, field: BitField) -> usize {
        eligible_bits(m, FlipTarget::Stage(L11), field).unwrap().len()
    }

    #[test]
    fn eligibility_of_one() {
        let m = one_weight(1.0);
        assert_eq!(count(&m, BitField::Sign), 1);
        assert_eq!(count(&m, BitField::Exponent), 7);
        assert_eq!(count(&m, BitField::Mantissa), 0);
        let neg = one_weight(-1.0);
        assert_eq!(count(&neg, BitField::Sign), 0);
    }

    #[test]
    fn positive_zero_only_sign_eligible() {
        let m = one_weight(0.0);
        assert_eq!(count(&m, BitField::Sign), 1);
        assert_eq!(count(&m, BitField::Exponent), 0);
        assert_eq!(count(&m, BitField::Mantissa), 0);
        let mut m = m;
        let r = inject_random(&mut m, &FlipPlan::new(FlipTarget::Stage(L11), BitField::Sign, 1.0, 0)).unwrap();
        assert_eq!(r.applied_count, 1);
        assert_eq!(m.weights(L11).unwrap().get(0, 0).to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn clearing_exponent_lsb_halves() {
        let mut m = one_weight(1.0);
        let rec = FlipRecord::from_flips(vec![BitFlip {
            address: BitAddress { layer: L11, row: 0, col: 0, bit: 23 },
            before: 1,
            after: 0,
        }]);
        rec.apply(&mut m).unwrap();
        assert_eq!(m.weights(L11).unwrap().get(0, 0), 0.5);
    }

    #[test]
    fn eligible_order_is_bit_descending() {
        let m = one_weight(1.0);
        let bits: Vec<u8> = eligible_bits(&m, FlipTarget::Stage(L11), BitField::Exponent)
            .unwrap()
            .iter()
            .map(|a| a.bit)
            .collect();
        assert_eq!(bits, vec![29, 28, 27, 26, 25, 24, 23]);
    }

    #[test]
    fn zero_weight_counts() {
        let mut m = one_weight(1.0);
        assert_eq!(zero_weight(&mut m, L11, 0, 0).unwrap(), 7);
        assert_eq!(m.weights(L11).unwrap().get(0, 0).to_bits(), 0);
        assert_eq!(zero_weight(&mut m, L11, 0, 0).unwrap(), 0);
        let mut m = one_weight(-2.0);
        assert_eq!(zero_weight(&mut m, L11, 0, 0).unwrap(), 2);
        assert!(zero_weight(&mut m, L11, 1, 0).is_err());
    }

    #[test]
    fn full_sign_flip_makes_everything_negative() {
        let mut m = init_model(Architecture::Gin, 3, 8, 2, Activation::Relu, 5).unwrap();
        inject_random(&mut m, &FlipPlan::new(FlipTarget::Mlp(1), BitField::Sign, 1.0, 3)).unwrap();
        for id in m.stages_of(1).unwrap() {
            assert!(m.weights(id).unwrap().values().iter().all(|w| w.is_sign_negative()));
        }
    }

    #[test]
    fn flip_count_rounding() {
        assert_eq!(flip_count(0.1, 30), 3);
        assert_eq!(flip_count(0.95, 20), 19);
        assert_eq!(flip_count(0.01, 7), 1);
        assert_eq!(flip_count(1.0, 7), 7);
        assert_eq!(flip_count(1e-12, 100), 0);
        assert_eq!(flip_count(0.5, 0), 0);
    }

    #[test]
    fn fraction_outside_unit_interval() {
        let mut m = one_weight(1.0);
        for f in [0.0, -0.1, 1.5, f64::NAN] {
            let plan = FlipPlan::new(FlipTarget::Stage(L11), BitField::Sign, f, 0);
            assert!(inject_random(&mut m, &plan).is_err());
        }
    }

    #[test]
    fn unknown_layer_is_address_error() {
        let m = one_weight(1.0);
        assert!(matches!(
            eligible_bits(&m, FlipTarget::Mlp(4), BitField::Sign),
            Err(Error::Address(_))
        ));
    }

    #[test]
    fn target_parsing() {
        assert_eq!("2".parse::<FlipTarget>().unwrap(), FlipTarget::Mlp(2));
        assert_eq!(
            "1.2".parse::<FlipTarget>().unwrap(),
            FlipTarget::Stage(LayerId::new(1, 2))
        );
        assert!("0".parse::<FlipTarget>().is_err());
        assert!("1.2.3".parse::<FlipTarget>().is_err());
    }

    #[test]
    fn record_text_round_trip() {
        let mut m = init_model(Architecture::Ds, 2, 4, 2, Activation::Sigmoid, 8).unwrap();
        let plan = FlipPlan::new(FlipTarget::Mlp(2), BitField::Mantissa, 0.3, 77);
        let r = inject_random(&mut m, &plan).unwrap();
        let back = FlipRecord::from_text(&r.to_text()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn field_population_counts_only_real_flips() {
        let mut m = init_model(Architecture::Gin, 2, 4, 1, Activation::Relu, 2).unwrap();
        let mut plan = FlipPlan::new(FlipTarget::Mlp(1), BitField::Sign, 1.0, 1);
        plan.population = FlipPopulation::FieldBits;
        let before_negative = m
            .weights(L11)
            .unwrap()
            .values()
            .iter()
            .chain(m.weights(LayerId::new(1, 2)).unwrap().values())
            .filter(|w| w.is_sign_negative())
            .count();
        let r = inject_random(&mut m, &plan).unwrap();
        assert_eq!(r.eligible_count, 4 * 2 + 4 * 4);
        assert_eq!(r.applied_count, r.eligible_count - before_negative);
    }

    proptest! {
        #[test]
        fn inject_then_reapply_restores(seed in any::<u64>(), field in 0usize..3, fraction in 0.001f64..=1.0) {
            let field = BitField::ALL[field];
            let mut m = init_model(Architecture::Gin, 3, 6, 2, Activation::Silu, seed ^ 0x55).unwrap();
            let original = m.weight_bits();
            let plan = FlipPlan::new(FlipTarget::Mlp(1 + (seed % 2) as usize), field, fraction, seed);
            let r = inject_random(&mut m, &plan).unwrap();
            prop_assert_eq!(r.applied_count, flip_count(fraction, r.eligible_count));
            for f in &r.flips {
                prop_assert_eq!(f.before, field.eligible_value());
                prop_assert_eq!(f.address.field(), field);
            }
            r.apply(&mut m).unwrap();
            prop_assert_eq!(m.weight_bits(), original);
        }

        #[test]
        fn clearing_exponent_or_mantissa_never_grows(bits in any::<u32>(), bit in 0u8..31) {
            let w = f32::from_bits(bits);
            prop_assume!(w.is_finite());
            if (bits >> bit) & 1 == 1 {
                let cleared = f32::from_bits(bits & !(1 << bit));
                prop_assert!(cleared.abs() <= w.abs());
            }
        }
    }
}
