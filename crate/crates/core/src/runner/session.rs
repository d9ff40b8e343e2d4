//! A network wired to its stimulus encoder.

use rand_chacha::ChaCha8Rng;

use crate::encoding::{binarize, encode, EncodingParams, MnistImage, SensoryRouter, IMAGE_SIDE};
use crate::error::{Result, WtaError};
use crate::network::Network;
use crate::rng::named_rng;
use crate::runner::config::RunConfig;
use crate::spike::SpikeVector;

fn encode_label(phase: &str, field: usize) -> String {
    format!("{phase}:encode:field{field}")
}

#[derive(Clone, Debug)]
pub struct Session {
    pub network: Network,
    router: SensoryRouter,
    encoding: EncodingParams,
    threshold: u8,
    field_rngs: Vec<ChaCha8Rng>,
    sensory: Vec<SpikeVector>,
    scratch: Vec<usize>,
}

impl Session {
    /// Fresh network for `config`, on the `train` phase streams.
    pub fn new(config: &RunConfig) -> Result<Session> {
        let network = Network::new(config.topology()?, &config.network_params())?;
        let router = SensoryRouter::new(network.topology(), IMAGE_SIDE, IMAGE_SIDE)?;
        let encoding = config.encoding();
        encoding.spike_probability()?;
        let mut session = Session {
            sensory: router.blank(0),
            field_rngs: Vec::new(),
            network,
            router,
            encoding,
            threshold: config.threshold,
            scratch: Vec::new(),
        };
        session.set_phase("train");
        Ok(session)
    }

    pub fn fields(&self) -> usize {
        self.router.fields()
    }

    /// Restarts every sampling and encoding stream on the substreams of `phase`.
    pub fn set_phase(&mut self, phase: &str) {
        self.network.set_phase(phase);
        let seed = self.network.seed();
        self.field_rngs = (0..self.router.fields())
            .map(|f| named_rng(seed, &encode_label(phase, f)))
            .collect();
    }

    pub fn encode_positions(&self) -> Vec<u128> {
        self.field_rngs.iter().map(|r| r.get_word_pos()).collect()
    }

    pub fn set_encode_positions(&mut self, positions: &[u128]) -> Result<()> {
        if positions.len() != self.field_rngs.len() {
            return Err(WtaError::Checkpoint(format!(
                "{} encoding stream positions for {} fields",
                positions.len(),
                self.field_rngs.len()
            )));
        }
        for (r, &p) in self.field_rngs.iter_mut().zip(positions) {
            r.set_word_pos(p);
        }
        Ok(())
    }

    /// Presents one stimulus, `images[f]` to input field `f`. Afterwards
    /// [`Network::stimulus_counts`] holds each circuit's response.
    pub fn present(&mut self, images: &[&MnistImage]) -> Result<()> {
        if images.len() != self.router.fields() {
            return Err(WtaError::config(format!(
                "{} images for {} input fields",
                images.len(),
                self.router.fields()
            )));
        }
        let mut streams = images
            .iter()
            .map(|img| encode(&binarize(img, self.threshold), &self.encoding))
            .collect::<Result<Vec<_>>>()?;
        self.network.begin_stimulus();
        for _ in 0..self.encoding.duration {
            let t = self.network.time();
            self.router.reset(&mut self.sensory, t);
            for (f, stream) in streams.iter_mut().enumerate() {
                stream.next_step(&mut self.field_rngs[f], &mut self.scratch);
                self.router.route(f, &self.scratch, &mut self.sensory);
            }
            self.network.step(&self.sensory)?;
        }
        Ok(())
    }
}
