//! Browser bindings: degrade a phantom, restore it with a chosen method and
//! inspect the per-level iteration schedule.

use cascade_restore::cascade::{default_levels, max_feasible_levels};
use cascade_restore::experiment::{blur_level, noise_level, MethodChoice, Scenario};
use cascade_restore::solve::schedule_for;
use cascade_restore::{
    degrade, phantom, psnr, run_method, CascadeConfig, Degraded, Error, ImageGrid, Result, Smoother,
};
use wasm_bindgen::prelude::*;

fn to_js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Grayscale to RGBA bytes for `ImageData`.
fn rgba(image: &ImageGrid) -> Vec<u8> {
    image
        .data()
        .iter()
        .flat_map(|&v| {
            let g = v.round().clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    truth: ImageGrid,
    degraded: Option<Degraded>,
    restored: Option<ImageGrid>,
    report: String,
}

impl Demo {
    pub fn try_new(side: usize) -> Result<Demo> {
        if !(9..=513).contains(&side) {
            return Err(Error::Config(format!("side must lie in 9..=513, got {side}")));
        }
        Ok(Demo {
            truth: phantom(side),
            degraded: None,
            restored: None,
            report: String::new(),
        })
    }

    pub fn try_degrade(&mut self, blur: &str, noise: &str, seed: u32) -> Result<f64> {
        let scenario = Scenario {
            blur: blur_level(blur)?,
            noise: noise_level(noise)?,
        };
        let d = degrade(&self.truth, &scenario.spec(u64::from(seed)))?;
        let delta = d.delta.value();
        self.degraded = Some(d);
        self.restored = None;
        Ok(delta)
    }

    fn degraded(&self) -> Result<&Degraded> {
        self.degraded
            .as_ref()
            .ok_or_else(|| Error::Config("degrade the image first".into()))
    }

    /// Restores with `method` (cg, mr, iecmg-l, iecmg-p, eecmg); cascades use
    /// `smoother` and `levels`, where 0 picks the default depth.
    pub fn try_restore(&mut self, method: &str, smoother: &str, levels: usize) -> Result<f64> {
        let d = self.degraded()?;
        let smoother: Smoother = smoother.parse()?;
        let choice = MethodChoice::parse(method, smoother)?;
        let mut config = choice.apply(&CascadeConfig::default());
        config.levels = match levels {
            0 => default_levels(d.kernel.n(), d.kernel.band()),
            l => l,
        };
        let (restored, per_level) = run_method(&d.noisy, &d.kernel, d.delta, &config)?;
        let score = psnr(&self.truth, &restored)?;
        let mut report = format!("{}: {score:.2} dB\n", config.label());
        for level in &per_level {
            report.push_str(&format!("{level}\n"));
        }
        self.report = report;
        self.restored = Some(restored);
        Ok(score)
    }

    pub fn try_schedule(levels: usize) -> Result<Vec<u32>> {
        if levels == 0 {
            return Err(Error::Config("at least one level is required".into()));
        }
        let budgets = schedule_for(levels, &Default::default())?;
        Ok(budgets.into_iter().map(|m| m as u32).collect())
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(side: usize) -> std::result::Result<Demo, JsError> {
        Demo::try_new(side).map_err(to_js)
    }

    pub fn side(&self) -> usize {
        self.truth.width()
    }

    /// Blurs with preset `b1`..`b4`, adds noise `v1`..`v4`; returns the
    /// noise RMS.
    pub fn degrade(&mut self, blur: &str, noise: &str, seed: u32) -> std::result::Result<f64, JsError> {
        self.try_degrade(blur, noise, seed).map_err(to_js)
    }

    /// Returns the PSNR of the restoration in dB.
    pub fn restore(&mut self, method: &str, smoother: &str, levels: usize) -> std::result::Result<f64, JsError> {
        self.try_restore(method, smoother, levels).map_err(to_js)
    }

    /// Deepest cascade the current blur allows; 0 before `degrade`.
    pub fn max_levels(&self) -> usize {
        self.degraded
            .as_ref()
            .map_or(0, |d| max_feasible_levels(d.kernel.n(), d.kernel.band()))
    }

    /// Iteration budgets per level, coarsest first.
    pub fn schedule(levels: usize) -> std::result::Result<Vec<u32>, JsError> {
        Demo::try_schedule(levels).map_err(to_js)
    }

    pub fn truth_rgba(&self) -> Vec<u8> {
        rgba(&self.truth)
    }

    pub fn noisy_rgba(&self) -> Vec<u8> {
        self.degraded.as_ref().map(|d| rgba(&d.noisy)).unwrap_or_default()
    }

    pub fn restored_rgba(&self) -> Vec<u8> {
        self.restored.as_ref().map(rgba).unwrap_or_default()
    }

    /// Per-level log of the last restoration.
    pub fn report(&self) -> String {
        self.report.clone()
    }
}
