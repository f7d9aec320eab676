//! Configurable topic modeling.
//!
//! A corpus is organized as documents made of blobs, and blobs made of
//! factors. One blob shares a single topic across all its items, so the
//! same engine trains LDA (one word per blob), SentenceLDA (one sentence
//! per blob), topics over time (a word plus a Beta-distributed timestamp
//! per blob) and supervised LDA (a Gaussian response per document).
//!
//! ```
//! use familia::{corpus::{Corpus, Schema}, model::ModelConfig, schedule::parse_schedule, trainer::{train, TrainOptions}};
//!
//! let corpus = Corpus::parse("0:apple | 0:pear\n0:bolt | 0:nut\n", &Schema::discrete_only()).unwrap();
//! let config = ModelConfig::new(corpus.schema.clone(), 2);
//! let options = TrainOptions::new(parse_schedule("4MH-1GS", 10).unwrap(), 7);
//! let (state, report) = train(corpus, config, &options).unwrap();
//! assert_eq!(report.records.len(), 10);
//! assert!(state.counts_consistent());
//! ```

pub mod alias;
pub mod continuous;
pub mod corpus;
pub mod gibbs;
pub mod inference;
pub mod likelihood;
pub mod math;
pub mod metropolis;
pub mod model;
pub mod parallel;
pub mod schedule;
pub mod semantics;
pub mod synth;
pub mod trainer;

pub use corpus::{Corpus, Schema};
pub use model::{ModelConfig, ModelState, TopicModel};
pub use schedule::{parse_schedule, Sampler, Schedule};
pub use trainer::{train, TrainOptions, TrainReport};
