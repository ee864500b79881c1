//! Flat experiment settings shared by the command line and the TOML file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use nhgauge::floquet::FastLayer;
use nhgauge::{
    BoundaryCondition, Complex64, DensityOrdering, Drive, EffectiveForm, FloquetProtocol, LossSign, ModelParams,
    OpenTermination,
};
use serde::{Deserialize, Serialize};

/// Every knob of every subcommand. Flags override the config file; unset
/// values fall back to per-command defaults in [`Settings::resolve`].
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recorded in the manifest; no experiment draws random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Single-particle hopping t.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Left gauge coupling, `re` or `re,im`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gl: Option<String>,
    /// Right gauge coupling, `re` or `re,im`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gr: Option<String>,
    /// On-site interaction U, `re` or `re,im`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Number of sites.
    #[arg(long = "L", global = true)]
    #[serde(rename = "L")]
    pub sites: Option<usize>,
    /// Number of bosons.
    #[arg(long = "N", global = true)]
    #[serde(rename = "N")]
    pub particles: Option<usize>,
    /// Periodic chain (`--pbc` or `--pbc false`).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub pbc: Option<bool>,
    /// Flux through the ring.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub flux: Option<f64>,
    /// Density evaluation in the hopping: normal, before or after.
    #[arg(long, global = true)]
    pub ordering: Option<String>,

    /// Base point of the winding: `auto` or `re,im`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Flux or momentum grid points for windings.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Largest grid the winding refinement may reach.
    #[arg(long, global = true)]
    pub max_grid: Option<usize>,
    /// Relative |Im E| threshold defining the complex sector.
    #[arg(long, global = true)]
    pub complex_threshold: Option<f64>,
    /// Cluster weight above which a state counts as bound.
    #[arg(long, global = true)]
    pub cluster_threshold: Option<f64>,
    /// Reference site of the density-density correlator.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Open doublon chain ending: pair-basis or full-cell.
    #[arg(long, global = true)]
    pub termination: Option<String>,
    /// Grid points per axis of the phase diagram.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Phase diagram covers [-range, range] on both axes.
    #[arg(long, global = true)]
    pub range: Option<f64>,

    /// three-step, two-frequency, modulated-interaction or square-wave.
    #[arg(long, global = true)]
    pub protocol: Option<String>,
    /// Static drive hopping Delta.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub hopping: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta2: Option<f64>,
    /// `re` or `re,im`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta3: Option<String>,
    /// Loss gradient, mu_j = j mu0.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta_r: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta_l: Option<String>,
    /// Slow modulation of the static hopping.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta_t: Option<f64>,
    /// Interaction modulation amplitude.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub u_omega: Option<String>,
    /// Comma-separated drive frequencies.
    #[arg(long, global = true)]
    pub frequencies: Option<String>,
    /// as-published or completed.
    #[arg(long, global = true)]
    pub form: Option<String>,
    /// as-written or flipped.
    #[arg(long, global = true)]
    pub loss_sign: Option<String>,
    /// Fast-to-slow frequency ratio of a fast loss layer (0: none).
    #[arg(long, global = true)]
    pub fast_ratio: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub fast_delta1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub fast_mu0: Option<f64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `other` wins wherever it is set.
    pub fn overlaid(&self, other: &Settings) -> Settings {
        let mut out = self.clone();
        overlay!(out, other;
            threads, out, seed, t, gl, gr, u, sites, particles, pbc, flux, ordering,
            delta, grid, max_grid, complex_threshold, cluster_threshold, k, termination, points, range,
            protocol, hopping, delta1, delta2, delta3, mu0, delta_r, delta_l, delta_t, u_omega,
            frequencies, form, loss_sign, fast_ratio, fast_delta1, fast_mu0,
        );
        out
    }

    /// Fill every unset value and canonicalize the textual ones, after
    /// checking that they parse.
    pub fn resolve(&self, command: &str) -> Result<Settings> {
        let mut s = self.clone();
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        s.threads.get_or_insert(threads);
        s.out.get_or_insert_with(|| PathBuf::from("."));
        s.seed.get_or_insert(0);
        s.t.get_or_insert(1.0);
        canonical(&mut s.gl, "1.5")?;
        canonical(&mut s.gr, "0")?;
        canonical(&mut s.u, "0")?;
        let sites = *s.sites.get_or_insert(20);
        s.particles.get_or_insert(2);
        s.pbc.get_or_insert(false);
        s.flux.get_or_insert(0.0);
        s.ordering.get_or_insert_with(|| "normal".into());
        parse_ordering(s.ordering.as_deref().unwrap())?;

        let delta = s.delta.get_or_insert_with(|| "auto".into());
        if delta != "auto" {
            *delta = format_complex(parse_complex(delta).context("--delta")?);
        }
        s.grid.get_or_insert(256);
        s.max_grid.get_or_insert(4096);
        s.complex_threshold.get_or_insert(nhgauge::spectral::DEFAULT_COMPLEX_THRESHOLD);
        s.cluster_threshold.get_or_insert(nhgauge::observables::CLUSTER_THRESHOLD);
        s.k.get_or_insert(sites / 2);
        let termination = if command == "phase-diagram" { "full-cell" } else { "pair-basis" };
        s.termination.get_or_insert_with(|| termination.into());
        parse_termination(s.termination.as_deref().unwrap())?;
        s.points.get_or_insert(20);
        s.range.get_or_insert(2.0);

        s.protocol.get_or_insert_with(|| "three-step".into());
        s.hopping.get_or_insert(1.0);
        s.delta1.get_or_insert(1.0);
        s.delta2.get_or_insert(0.5);
        canonical(&mut s.delta3, "0.3,0.2")?;
        s.mu0.get_or_insert(0.3);
        canonical(&mut s.delta_r, "0.3")?;
        canonical(&mut s.delta_l, "-0.5")?;
        s.delta_t.get_or_insert(0.0);
        canonical(&mut s.u_omega, "0")?;
        let freqs = s.frequencies.get_or_insert_with(|| "10,20,40".into());
        *freqs = parse_list(freqs)?.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",");
        s.form.get_or_insert_with(|| "as-published".into());
        parse_form(s.form.as_deref().unwrap())?;
        s.loss_sign.get_or_insert_with(|| "as-written".into());
        parse_loss_sign(s.loss_sign.as_deref().unwrap())?;
        s.fast_ratio.get_or_insert(0);
        s.fast_delta1.get_or_insert(1.0);
        s.fast_mu0.get_or_insert(0.3);
        if command == "floquet" {
            s.protocol()?;
        }
        s.model()?.validate()?;
        Ok(s)
    }

    fn get<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
        v.clone().ok_or_else(|| anyhow!("{name} is unset; resolve the settings first"))
    }

    pub fn boundary(&self) -> Result<BoundaryCondition> {
        Ok(if Self::get(&self.pbc, "pbc")? {
            BoundaryCondition::periodic().with_flux(Self::get(&self.flux, "flux")?)
        } else {
            BoundaryCondition::Open
        })
    }

    pub fn model(&self) -> Result<ModelParams> {
        Ok(ModelParams {
            t: Self::get(&self.t, "t")?,
            gamma_l: parse_complex(&Self::get(&self.gl, "gl")?)?,
            gamma_r: parse_complex(&Self::get(&self.gr, "gr")?)?,
            interaction: parse_complex(&Self::get(&self.u, "u")?)?,
            sites: Self::get(&self.sites, "L")?,
            particles: Self::get(&self.particles, "N")?,
            boundary: self.boundary()?,
            ordering: parse_ordering(&Self::get(&self.ordering, "ordering")?)?,
        })
    }

    /// `None` for `auto`.
    pub fn delta(&self) -> Result<Option<Complex64>> {
        let d = Self::get(&self.delta, "delta")?;
        if d == "auto" {
            Ok(None)
        } else {
            parse_complex(&d).map(Some)
        }
    }

    pub fn termination(&self) -> Result<OpenTermination> {
        parse_termination(&Self::get(&self.termination, "termination")?)
    }

    pub fn frequencies(&self) -> Result<Vec<f64>> {
        parse_list(&Self::get(&self.frequencies, "frequencies")?)
    }

    pub fn form(&self) -> Result<EffectiveForm> {
        parse_form(&Self::get(&self.form, "form")?)
    }

    /// Drive at the first listed frequency.
    pub fn protocol(&self) -> Result<FloquetProtocol> {
        let omega = *self.frequencies()?.first().ok_or_else(|| anyhow!("frequencies list is empty"))?;
        let delta = Self::get(&self.hopping, "hopping")?;
        let u = parse_complex(&Self::get(&self.u, "u")?)?;
        let delta_r = parse_complex(&Self::get(&self.delta_r, "delta_r")?)?;
        let delta_l = parse_complex(&Self::get(&self.delta_l, "delta_l")?)?;
        let loss_sign = parse_loss_sign(&Self::get(&self.loss_sign, "loss_sign")?)?;
        let drive = match Self::get(&self.protocol, "protocol")?.as_str() {
            "three-step" => Drive::ThreeStepHatanoNelson {
                delta,
                delta1: Self::get(&self.delta1, "delta1")?,
                interaction: u,
                mu0: Self::get(&self.mu0, "mu0")?,
                omega,
                loss_sign,
            },
            "two-frequency" => {
                let ratio = Self::get(&self.fast_ratio, "fast_ratio")?;
                let fast = (ratio > 0).then(|| -> Result<FastLayer> {
                    Ok(FastLayer {
                        delta1: Self::get(&self.fast_delta1, "fast_delta1")?,
                        mu0: Self::get(&self.fast_mu0, "fast_mu0")?,
                        omega: omega * ratio as f64,
                        loss_sign,
                    })
                });
                Drive::TwoFrequencySinusoid {
                    delta,
                    delta_t: Self::get(&self.delta_t, "delta_t")?,
                    interaction: u,
                    delta_r,
                    delta_l,
                    omega,
                    fast: fast.transpose()?,
                }
            }
            "modulated-interaction" => Drive::ModulatedInteraction {
                delta,
                interaction: u,
                delta_r,
                delta_l,
                interaction_drive: parse_complex(&Self::get(&self.u_omega, "u_omega")?)?,
                omega,
            },
            "square-wave" => Drive::SquareWaveGD {
                delta,
                delta1: Self::get(&self.delta1, "delta1")?,
                delta2: Self::get(&self.delta2, "delta2")?,
                delta3: parse_complex(&Self::get(&self.delta3, "delta3")?)?,
                period: std::f64::consts::TAU / omega,
            },
            other => bail!("unknown protocol {other:?}"),
        };
        let protocol = FloquetProtocol::new(drive, self.boundary()?);
        protocol.validate()?;
        Ok(protocol)
    }
}

fn canonical(slot: &mut Option<String>, default: &str) -> Result<()> {
    let text = slot.get_or_insert_with(|| default.into());
    *text = format_complex(parse_complex(text)?);
    Ok(())
}

/// `re` or `re,im`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().with_context(|| format!("not a number: {s:?}"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => bail!("expected `re` or `re,im`, got {text:?}"),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        bail!("non-finite value {text:?}");
    }
    Ok(z)
}

pub fn format_complex(z: Complex64) -> String {
    format!("{},{}", z.re, z.im)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("not a number: {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() || values.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        bail!("frequencies must be positive, got {text:?}");
    }
    Ok(values)
}

fn parse_ordering(text: &str) -> Result<DensityOrdering> {
    Ok(match text {
        "normal" => DensityOrdering::NormalOrdered,
        "before" => DensityOrdering::BeforeHop,
        "after" => DensityOrdering::AfterHop,
        _ => bail!("unknown ordering {text:?} (normal, before, after)"),
    })
}

fn parse_termination(text: &str) -> Result<OpenTermination> {
    Ok(match text {
        "pair-basis" => OpenTermination::PairBasis,
        "full-cell" => OpenTermination::FullCell,
        _ => bail!("unknown termination {text:?} (pair-basis, full-cell)"),
    })
}

fn parse_form(text: &str) -> Result<EffectiveForm> {
    Ok(match text {
        "as-published" => EffectiveForm::AsPublished,
        "completed" => EffectiveForm::Completed,
        _ => bail!("unknown effective form {text:?} (as-published, completed)"),
    })
}

fn parse_loss_sign(text: &str) -> Result<LossSign> {
    Ok(match text {
        "as-written" => LossSign::AsWritten,
        "flipped" => LossSign::Flipped,
        _ => bail!("unknown loss sign {text:?} (as-written, flipped)"),
    })
}
