//! Synthetic corpus generator.
//!
//! Each attribute's gold score is a quantile-quantized noisy linear
//! projection of the sample's feature vector. The pairwise cosine structure
//! of the projection weights therefore controls how correlated the gold
//! scores are, which makes the generator the ground-truth oracle for the
//! correlation and subspace-overlap analyses: related attributes are related
//! *by construction*.

use super::{validate_samples, Attribute, AttributeMap, DatasetError, Sample, ScoreMap};
use crate::num::{Matrix, Vector};
use crate::seed::rng_for;
use rand::Rng;
use rand_distr::StandardNormal;

/// Default latent noise level added to each attribute projection.
pub const DEFAULT_NOISE_STD: f64 = 0.2;

/// Share of each score label 1..=5 in a generated corpus.
///
/// The masses put most of the probability on labels 3 and 4 with thin tails,
/// matching how real rubric scores bunch in the middle of the scale, while
/// still guaranteeing every label appears once a corpus has a few hundred
/// samples.
pub const DEFAULT_SCORE_MASSES: [f64; 5] = [0.08, 0.17, 0.30, 0.30, 0.15];

/// Everything that determines a generated corpus. Two equal specs generate
/// byte-identical corpora.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    /// Image-feature width.
    pub d_img: usize,
    /// Per-attribute projection weights; their pairwise cosines are the
    /// target gold-score correlation structure (see
    /// [`weight_cosine_matrix`]).
    pub attribute_weights: AttributeMap<Vector>,
    /// Standard deviation of the Gaussian noise added to each latent score.
    pub noise_std: f64,
    pub seed: u64,
    /// Comment-feature width; 0 disables the comment channel entirely.
    pub d_cmt: usize,
    /// Fraction of samples that receive a comment-feature vector.
    pub comment_frac: f64,
}

impl SyntheticSpec {
    /// The default corpus shape: clustered weights from
    /// [`default_weights`], default noise, no comment channel.
    pub fn with_default_weights(
        n_samples: usize,
        d_img: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<SyntheticSpec, DatasetError> {
        Ok(SyntheticSpec {
            n_samples,
            d_img,
            attribute_weights: default_weights(d_img, seed)?,
            noise_std,
            seed,
            d_cmt: 0,
            comment_frac: 0.0,
        })
    }

    /// The implied gold-score correlation target.
    pub fn cosine_matrix(&self) -> Matrix {
        weight_cosine_matrix(&self.attribute_weights)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if self.n_samples == 0 {
            return Err(DatasetError::Config("n_samples must be positive".to_string()));
        }
        if self.d_img == 0 {
            return Err(DatasetError::Config("d_img must be positive".to_string()));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(DatasetError::Config(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if !(0.0..=1.0).contains(&self.comment_frac) {
            return Err(DatasetError::Config(format!(
                "comment_frac must be in [0, 1], got {}",
                self.comment_frac
            )));
        }
        for (attr, w) in self.attribute_weights.iter() {
            if w.len() != self.d_img {
                return Err(DatasetError::Config(format!(
                    "weight for '{attr}' has length {}, expected d_img = {}",
                    w.len(),
                    self.d_img
                )));
            }
            if w.norm() == 0.0 {
                return Err(DatasetError::Config(format!(
                    "weight for '{attr}' has zero norm"
                )));
            }
        }
        Ok(())
    }
}

/// The default grouping of the nine attributes into four rubric families:
/// form (realism, deformation, imagination), color (color_richness,
/// color_contrast), line (line_combination, line_texture), and composition
/// (picture_organization, transformation).
pub fn default_attribute_clusters() -> Vec<Vec<Attribute>> {
    vec![
        vec![Attribute::Realism, Attribute::Deformation, Attribute::Imagination],
        vec![Attribute::ColorRichness, Attribute::ColorContrast],
        vec![Attribute::LineCombination, Attribute::LineTexture],
        vec![Attribute::PictureOrganization, Attribute::Transformation],
    ]
}

/// Pairwise cosine similarities of the attribute weight vectors, in
/// canonical attribute order.
pub fn weight_cosine_matrix(weights: &AttributeMap<Vector>) -> Matrix {
    Matrix::from_fn(Attribute::COUNT, Attribute::COUNT, |i, j| {
        let wi = weights.get(Attribute::ALL[i]);
        let wj = weights.get(Attribute::ALL[j]);
        let denom = wi.norm() * wj.norm();
        if denom == 0.0 {
            0.0
        } else {
            wi.dot(wj).expect("equal lengths") / denom
        }
    })
}

/// Draws `count` orthonormal directions in `dim` dimensions by Gram–Schmidt
/// over seeded Gaussian draws.
fn orthonormal_directions(
    dim: usize,
    count: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<Vector>, DatasetError> {
    if dim < count {
        return Err(DatasetError::Config(format!(
            "cannot fit {count} orthonormal directions in {dim} dimensions"
        )));
    }
    let mut rng = rng_for(seed, label);
    let mut dirs: Vec<Vector> = Vec::with_capacity(count);
    while dirs.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for d in &dirs {
            let proj: f64 = v.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
            for (x, b) in v.iter_mut().zip(d.iter()) {
                *x -= proj * b;
            }
        }
        let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            // Degenerate draw (measure zero); try another vector.
            continue;
        }
        dirs.push(Vector::new(v.into_iter().map(|a| a / norm).collect()));
    }
    Ok(dirs)
}

/// Nine mutually orthonormal weight vectors — attributes carry independent
/// signals. Requires `d_img >= 9`.
pub fn orthogonal_weights(d_img: usize, seed: u64) -> Result<AttributeMap<Vector>, DatasetError> {
    let dirs = orthonormal_directions(d_img, Attribute::COUNT, seed, "synthetic/weights/orthogonal")?;
    Ok(AttributeMap::from_fn(|a| dirs[a.index()].clone()))
}

/// Weight vectors with a prescribed cluster structure: unit vectors whose
/// pairwise cosine is `within_cosine` inside a cluster and 0 across
/// clusters. `clusters` must partition all nine attributes. With
/// `within_cosine == 1` members of a cluster share one direction
/// (`d_img >= #clusters`); otherwise each member also gets its own
/// orthogonal component (`d_img >= #clusters + 9`).
pub fn clustered_weights(
    d_img: usize,
    clusters: &[Vec<Attribute>],
    within_cosine: f64,
    seed: u64,
) -> Result<AttributeMap<Vector>, DatasetError> {
    if !(0.0..=1.0).contains(&within_cosine) {
        return Err(DatasetError::Config(format!(
            "within_cosine must be in [0, 1], got {within_cosine}"
        )));
    }
    let mut seen = [false; 9];
    for cluster in clusters {
        for attr in cluster {
            if seen[attr.index()] {
                return Err(DatasetError::Config(format!(
                    "attribute '{attr}' appears in more than one cluster"
                )));
            }
            seen[attr.index()] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        let missing: Vec<&str> = Attribute::ALL
            .iter()
            .filter(|a| !seen[a.index()])
            .map(|a| a.key())
            .collect();
        return Err(DatasetError::Config(format!(
            "clusters must cover every attribute; missing: {}",
            missing.join(", ")
        )));
    }

    if within_cosine == 1.0 {
        let dirs = orthonormal_directions(d_img, clusters.len(), seed, "synthetic/weights/clustered")?;
        let mut slots: [Option<Vector>; 9] = Default::default();
        for (c, cluster) in clusters.iter().enumerate() {
            for attr in cluster {
                slots[attr.index()] = Some(dirs[c].clone());
            }
        }
        return Ok(AttributeMap::from_fn(|a| {
            slots[a.index()].clone().expect("partition checked")
        }));
    }

    // w = √t·u_cluster + √(1-t)·e_attr with all u, e mutually orthonormal
    // gives ⟨w_p, w_q⟩ = t within a cluster and 0 across clusters.
    let dirs = orthonormal_directions(
        d_img,
        clusters.len() + Attribute::COUNT,
        seed,
        "synthetic/weights/clustered",
    )?;
    let (cluster_dirs, member_dirs) = dirs.split_at(clusters.len());
    let shared = within_cosine.sqrt();
    let own = (1.0 - within_cosine).sqrt();
    let mut slots: [Option<Vector>; 9] = Default::default();
    for (c, cluster) in clusters.iter().enumerate() {
        for attr in cluster {
            let u = &cluster_dirs[c];
            let e = &member_dirs[attr.index()];
            let w: Vec<f64> = u
                .iter()
                .zip(e.iter())
                .map(|(ui, ei)| shared * ui + own * ei)
                .collect();
            slots[attr.index()] = Some(Vector::new(w));
        }
    }
    Ok(AttributeMap::from_fn(|a| slots[a.index()].clone().expect("partition checked")))
}

/// The default weight structure: the four rubric families of
/// [`default_attribute_clusters`] as clusters, one shared direction per
/// family, orthogonal across families.
pub fn default_weights(d_img: usize, seed: u64) -> Result<AttributeMap<Vector>, DatasetError> {
    clustered_weights(d_img, &default_attribute_clusters(), 1.0, seed)
}

/// Assigns 1..=5 labels by rank so that label `k` receives `masses[k-1]` of
/// the samples (up to rounding). Ties in the latent order break by index.
fn quantile_labels(latents: &[f64], masses: &[f64; 5]) -> Vec<u8> {
    let n = latents.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| latents[a].total_cmp(&latents[b]).then(a.cmp(&b)));

    // Cumulative rank cut for each label; the last cut is pinned to n.
    let mut cuts = [0usize; 5];
    let mut cum = 0.0;
    for (k, mass) in masses.iter().enumerate() {
        cum += mass;
        cuts[k] = (cum * n as f64).round() as usize;
    }
    cuts[4] = n;
    for k in 1..5 {
        cuts[k] = cuts[k].max(cuts[k - 1]);
    }

    let mut labels = vec![0u8; n];
    let mut label = 0usize;
    for (rank, &idx) in order.iter().enumerate() {
        while rank >= cuts[label] {
            label += 1;
        }
        labels[idx] = (label + 1) as u8;
    }
    labels
}

/// Generates a corpus from the spec. Deterministic: equal specs produce
/// identical samples. Gold scores are quantile-quantized noisy projections
/// `⟨w_attr, x⟩ + ε`, so as `noise_std → 0` the gold-score correlation
/// matrix approaches [`SyntheticSpec::cosine_matrix`].
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Sample>, DatasetError> {
    spec.validate()?;
    let n = spec.n_samples;

    let mut feature_rng = rng_for(spec.seed, "synthetic/features");
    let features: Vec<Vector> = (0..n)
        .map(|_| {
            Vector::new(
                (0..spec.d_img)
                    .map(|_| feature_rng.sample(StandardNormal))
                    .collect(),
            )
        })
        .collect();

    // Per-attribute latent scores and quantized labels.
    let mut labels: Vec<Vec<u8>> = Vec::with_capacity(Attribute::COUNT);
    for attr in Attribute::ALL {
        let w = spec.attribute_weights.get(attr);
        let mut noise_rng = rng_for(spec.seed, &format!("synthetic/noise/{}", attr.key()));
        let latents: Vec<f64> = features
            .iter()
            .map(|x| {
                let noise: f64 = noise_rng.sample(StandardNormal);
                w.dot(x).expect("validated length") + spec.noise_std * noise
            })
            .collect();
        labels.push(quantile_labels(&latents, &DEFAULT_SCORE_MASSES));
    }

    // Optional comment channel: a seeded linear image of the centered gold
    // scores plus noise, so comments genuinely carry score information.
    let comment_features: Vec<Option<Vector>> = if spec.d_cmt > 0 && spec.comment_frac > 0.0 {
        let mut proj_rng = rng_for(spec.seed, "synthetic/comment/proj");
        let proj = Matrix::from_fn(spec.d_cmt, Attribute::COUNT, |_, _| {
            let g: f64 = proj_rng.sample(StandardNormal);
            g / 3.0
        });
        let mut mask_rng = rng_for(spec.seed, "synthetic/comment/mask");
        let mut noise_rng = rng_for(spec.seed, "synthetic/comment/noise");
        (0..n)
            .map(|i| {
                if !mask_rng.random_bool(spec.comment_frac) {
                    return None;
                }
                let centered = Vector::new(
                    Attribute::ALL
                        .iter()
                        .map(|a| (labels[a.index()][i] as f64 - 3.0) / 2.0)
                        .collect(),
                );
                let mut c = proj.matvec(&centered).expect("projection shape");
                for v in c.as_mut_slice() {
                    let eta: f64 = noise_rng.sample(StandardNormal);
                    *v += 0.3 * eta;
                }
                Some(c)
            })
            .collect()
    } else {
        vec![None; n]
    };

    let samples: Vec<Sample> = (0..n)
        .map(|i| Sample {
            id: format!("synthetic-{i:06}"),
            features: features[i].clone(),
            scores: ScoreMap::from_fn(|a| labels[a.index()][i]),
            comment_features: comment_features[i].clone(),
            grade: None,
            media: None,
        })
        .collect();

    validate_samples(&samples)?;
    Ok(samples)
}
