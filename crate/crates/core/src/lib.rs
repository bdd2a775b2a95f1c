pub mod dsp;
mod http;
pub mod scene;
pub mod segmenter;
pub mod source;
pub mod wav;

pub use http::API_KEY_ENV;
pub mod spatializer;
pub mod renderer;
pub mod mixer;
pub mod metrics;
pub mod pipeline;
