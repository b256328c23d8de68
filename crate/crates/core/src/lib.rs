//! Finger vein maps from transillumination video, and heart rate from the
//! width of one tracked vessel.
//!
//! ```no_run
//! use veinpulse::{monitor, render_phantom, Method, PhantomSpec, PipelineConfig, Preset};
//!
//! let (video, _truth) = render_phantom(&PhantomSpec::default())?;
//! let cfg = PipelineConfig::default();
//! let out = monitor(&video, Method::MaxCurvature, Preset::PaperMc, &cfg)?;
//! println!("{:.1} bpm", out.analysis.result.bpm);
//! # Ok::<(), veinpulse::Error>(())
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod frame;
pub mod hr;
pub mod ingest;
pub mod morph;
pub mod pgm;
pub mod pipeline;
pub mod roi;
pub mod synth;
pub mod track;
pub mod veinmap;

pub use config::{PeakSeries, PipelineConfig};
pub use error::{Error, Result};
pub use frame::{normalize_frame, Frame, VideoSequence};
pub use hr::{HeartRateResult, TrendSeries};
pub use pipeline::{monitor, MonitorOutput, Preset};
pub use roi::{localize_finger, FingerMask};
pub use synth::{render_phantom, GroundTruth, PhantomSpec, VesselSpec};
pub use track::WidthSeries;
pub use veinmap::{binarize, Method, ScoreField, VeinMap};
