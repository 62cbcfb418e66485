//! Dense network kernel for the actor and critic.

mod adam;
mod categorical;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use categorical::Categorical;
pub use checkpoint::{Checkpoint, CHECKPOINT_HEADER};
pub use mlp::{Forward, ForwardCache, Grads, Layer, Mlp};

/// Hidden layer widths shared by actor and critic.
pub const HIDDEN: [usize; 2] = [64, 64];

/// Layer sizes `[input, 64, 64, output]`.
pub fn layer_sizes(input: usize, output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(HIDDEN);
    sizes.push(output);
    sizes
}
