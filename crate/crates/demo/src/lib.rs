//! WebAssembly bindings for the browser demo in `www/`.

pub mod state;

use state::DemoState;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    state: DemoState,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, hard: bool) -> Demo {
        Demo { state: DemoState::new(seed, hard) }
    }

    pub fn regenerate(&mut self, seed: u64, hard: bool) {
        self.state.regenerate(seed, hard);
    }

    /// Returns a one-line description of the loaded checkpoint.
    pub fn load_model(&mut self, bytes: &[u8]) -> Result<String, JsError> {
        self.state.load_model(bytes).map_err(|e| JsError::new(&e))
    }

    /// `"model"` when a loaded checkpoint fits the map, else `"ground truth"`.
    pub fn mode(&self) -> String {
        match self.state.mode() {
            state::Mode::Model => "model".into(),
            state::Mode::GroundTruth => "ground truth".into(),
        }
    }

    pub fn grid(&self) -> usize {
        self.state.shape.width
    }

    pub fn image_size(&self) -> usize {
        self.state.image.width
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        self.state.image_rgba()
    }

    /// The plan as a JSON object; see `state::PlanView`.
    pub fn plan(&mut self, sr: usize, sc: usize, tr: usize, tc: usize, eps: f64) -> Result<String, JsError> {
        let view = self.state.plan((sr, sc), (tr, tc), eps).map_err(|e| JsError::new(&e))?;
        serde_json::to_string(&view).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Row-major values of a display layer.
    pub fn layer(&mut self, name: &str, sr: usize, sc: usize, tr: usize, tc: usize, eps: f64) -> Result<Vec<f64>, JsError> {
        self.state.layer(name, (sr, sc), (tr, tc), eps).map_err(|e| JsError::new(&e))
    }
}
