use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_rho_max() -> u32 {
    8
}
fn default_alpha_mir() -> f64 {
    0.3
}

/// Tag frequencies plus the oversampling knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagCatalog {
    pub counts: BTreeMap<String, u64>,
    #[serde(default = "default_rho_max")]
    pub rho_max: u32,
    #[serde(default = "default_alpha_mir")]
    pub alpha_mir: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggedSample {
    pub id: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub sample_id: String,
    pub mirrored: bool,
    /// Tags of this appearance, with sides swapped when mirrored.
    pub tags: Vec<String>,
}

impl TagCatalog {
    pub fn from_samples(samples: &[TaggedSample]) -> Self {
        let mut counts = BTreeMap::new();
        for s in samples {
            for t in &s.tags {
                *counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Self {
            counts,
            rho_max: default_rho_max(),
            alpha_mir: default_alpha_mir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.is_empty() {
            return Err(Error::Config("tag catalog is empty".into()));
        }
        if let Some((t, _)) = self.counts.iter().find(|(_, &c)| c == 0) {
            return Err(Error::Config(format!("tag {t} has zero count")));
        }
        if self.rho_max < 1 {
            return Err(Error::Config("rho_max must be at least 1".into()));
        }
        if !(self.alpha_mir >= 0.0) {
            return Err(Error::Config("alpha_mir must be non-negative".into()));
        }
        Ok(())
    }

    /// Median tag frequency; the mean of the two middle values for an even
    /// number of tags.
    pub fn median_frequency(&self) -> f64 {
        let mut v: Vec<u64> = self.counts.values().copied().collect();
        v.sort_unstable();
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2] as f64
        } else {
            (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
        }
    }
}

/// `ρ_m = clamp(round(τ / f_m), 1, ρ_max)` with `τ` the median frequency.
pub fn asfo_multipliers(catalog: &TagCatalog) -> Result<BTreeMap<String, u32>> {
    catalog.validate()?;
    let tau = catalog.median_frequency();
    Ok(catalog
        .counts
        .iter()
        .map(|(t, &f)| {
            let r = (tau / f as f64).round().clamp(1.0, f64::from(catalog.rho_max));
            (t.clone(), r as u32)
        })
        .collect())
}

/// Largest multiplier among the sample's tags; untagged samples get 1.
pub fn sample_multiplier(tags: &[String], multipliers: &BTreeMap<String, u32>) -> Result<u32> {
    tags.iter().try_fold(1, |acc, t| {
        multipliers
            .get(t)
            .map(|&r| acc.max(r))
            .ok_or_else(|| Error::UnknownTag(t.clone()))
    })
}

/// `min(α (r - 1), 1)`.
pub fn mirror_probability(r: u32, alpha_mir: f64) -> f64 {
    (alpha_mir * (f64::from(r) - 1.0)).clamp(0.0, 1.0)
}

/// Swaps `left` and `right` tokens in an underscore- or dash-separated tag.
pub fn mirror_tag(tag: &str) -> String {
    let mut out = String::with_capacity(tag.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        out.push_str(match token.as_str() {
            "left" => "right",
            "right" => "left",
            "Left" => "Right",
            "Right" => "Left",
            other => other,
        });
        token.clear();
    };
    for ch in tag.chars() {
        if ch == '_' || ch == '-' || ch == ' ' {
            flush(&mut token, &mut out);
            out.push(ch);
        } else {
            token.push(ch);
        }
    }
    flush(&mut token, &mut out);
    out
}

/// Each sample appears `r_j` times; each appearance is mirrored
/// independently with probability `p_mir(r_j)`.
pub fn build_epoch_plan<R: Rng + ?Sized>(
    samples: &[TaggedSample],
    catalog: &TagCatalog,
    rng: &mut R,
) -> Result<Vec<PlanEntry>> {
    let mult = asfo_multipliers(catalog)?;
    let mut plan = Vec::new();
    for s in samples {
        let r = sample_multiplier(&s.tags, &mult)?;
        let p = mirror_probability(r, catalog.alpha_mir);
        for _ in 0..r {
            let mirrored = p > 0.0 && rng.random::<f64>() < p;
            let tags = if mirrored {
                s.tags.iter().map(|t| mirror_tag(t)).collect()
            } else {
                s.tags.clone()
            };
            plan.push(PlanEntry {
                sample_id: s.id.clone(),
                mirrored,
                tags,
            });
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn catalog() -> TagCatalog {
        TagCatalog {
            counts: [("walk", 100), ("jump", 20), ("cartwheel", 5)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            rho_max: 8,
            alpha_mir: 0.3,
        }
    }

    fn tags(t: &[&str]) -> Vec<String> {
        t.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn multiplier_table() {
        let m = asfo_multipliers(&catalog()).unwrap();
        assert_eq!((m["walk"], m["jump"], m["cartwheel"]), (1, 1, 4));
        assert_eq!(sample_multiplier(&tags(&["walk", "cartwheel"]), &m).unwrap(), 4);
        assert_eq!(sample_multiplier(&[], &m).unwrap(), 1);
        assert!(matches!(sample_multiplier(&tags(&["fly"]), &m), Err(Error::UnknownTag(_))));
        assert_eq!(mirror_probability(1, 0.3), 0.0);
        assert!((mirror_probability(4, 0.3) - 0.9).abs() < 1e-15);
        assert_eq!(mirror_probability(8, 0.3), 1.0);
    }

    #[test]
    fn equal_frequencies_give_identity_plan() {
        let samples: Vec<TaggedSample> = (0..5)
            .map(|i| TaggedSample { id: format!("s{i}"), tags: tags(&["walk"]) })
            .collect();
        let cat = TagCatalog::from_samples(&samples);
        let plan = build_epoch_plan(&samples, &cat, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(plan.len(), 5);
        assert!(plan.iter().all(|e| !e.mirrored));
    }

    #[test]
    fn plan_size_and_side_swap() {
        let samples = vec![
            TaggedSample { id: "a".into(), tags: tags(&["walk"]) },
            TaggedSample { id: "b".into(), tags: tags(&["cartwheel"]) },
            TaggedSample { id: "c".into(), tags: tags(&["jump"]) },
        ];
        let mut cat = catalog();
        cat.counts.insert("cartwheel".into(), 5);
        let plan = build_epoch_plan(&samples, &cat, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(plan.len(), 1 + 4 + 1);
        assert_eq!(mirror_tag("wave_left_hand"), "wave_right_hand");
        assert_eq!(mirror_tag("right-kick"), "left-kick");
        assert_eq!(mirror_tag("leftover"), "leftover");
    }
}
