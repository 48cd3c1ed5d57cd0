//! Seeded random streams.
//!
//! Every draw in a simulation comes from a [`Streams`] root: named substreams
//! are derived by hashing the label into the root seed, so adding draws to one
//! component never shifts another component's sequence.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the simulator.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Root of the named substream tree for one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    root: u64,
}

impl Streams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn seed_for(&self, label: &str, index: u64) -> u64 {
        splitmix64(splitmix64(self.root ^ fnv1a(label)) ^ splitmix64(index))
    }

    pub fn stream(&self, label: &str) -> SimRng {
        self.indexed(label, 0)
    }

    pub fn indexed(&self, label: &str, index: u64) -> SimRng {
        SimRng::seed_from_u64(self.seed_for(label, index))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Word {
    U32(u32),
    U64(u64),
}

/// Wraps a generator and records every word it hands out.
#[derive(Clone, Debug)]
pub struct RecordingRng<R> {
    inner: R,
    words: Vec<Word>,
}

impl<R: RngCore + Clone> RecordingRng<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            words: Vec::new(),
        }
    }

    /// Freezes the recording. The tape keeps the generator's state at the
    /// end of the recording so a replay can run past the recorded words.
    pub fn into_tape(self) -> NoiseTape<R> {
        NoiseTape {
            words: self.words,
            tail: self.inner,
        }
    }
}

impl<R: RngCore> RngCore for RecordingRng<R> {
    fn next_u32(&mut self) -> u32 {
        let w = self.inner.next_u32();
        self.words.push(Word::U32(w));
        w
    }

    fn next_u64(&mut self) -> u64 {
        let w = self.inner.next_u64();
        self.words.push(Word::U64(w));
        w
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

/// Recorded programming noise of one run.
#[derive(Clone, Debug)]
pub struct NoiseTape<R> {
    words: Vec<Word>,
    tail: R,
}

impl<R: RngCore + Clone> NoiseTape<R> {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn replay(&self) -> ReplayRng<'_, R> {
        ReplayRng {
            tape: &self.words,
            pos: 0,
            tail: self.tail.clone(),
        }
    }
}

/// Plays back a [`NoiseTape`], then continues from the recorder's final state.
///
/// A replay must request words in the same order and widths as the recording;
/// a mismatch means the two runs diverged and is a bug in the caller.
#[derive(Debug)]
pub struct ReplayRng<'a, R> {
    tape: &'a [Word],
    pos: usize,
    tail: R,
}

impl<R: RngCore> RngCore for ReplayRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        match self.tape.get(self.pos) {
            Some(Word::U32(w)) => {
                self.pos += 1;
                *w
            }
            Some(Word::U64(_)) => panic!("replay diverged: expected u64 at word {}", self.pos),
            None => self.tail.next_u32(),
        }
    }

    fn next_u64(&mut self) -> u64 {
        match self.tape.get(self.pos) {
            Some(Word::U64(w)) => {
                self.pos += 1;
                *w
            }
            Some(Word::U32(_)) => panic!("replay diverged: expected u32 at word {}", self.pos),
            None => self.tail.next_u64(),
        }
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
