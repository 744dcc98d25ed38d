//! Dice, ASD and pseudo-label accuracy on hand-made masks.
//!
//!     cargo run --example metrics

use dpl::metrics::{asd, dice, pl_accuracy};
use dpl::Map;

fn square(size: usize, y0: usize, x0: usize, side: usize) -> Map<u8> {
    Map::from_fn(size, size, 1, |y, x, _| {
        u8::from((y0..y0 + side).contains(&y) && (x0..x0 + side).contains(&x))
    })
}

fn main() -> dpl::Result<()> {
    let gt = square(16, 4, 4, 6);
    for shift in 0..4 {
        let pred = square(16, 4, 4 + shift, 6);
        println!(
            "shift {shift}: dice {:.4}  asd {:.4}",
            dice(&pred, &gt)?,
            asd(&pred, &gt)?.unwrap()
        );
    }
    let empty = Map::zeros(16, 16, 1);
    println!("empty prediction: dice {}  asd {:?}", dice(&empty, &gt)?, asd(&empty, &gt)?);

    let pseudo = square(16, 4, 5, 6);
    let mask = Map::from_fn(16, 16, 1, |_, x, _| u8::from(x < 8));
    println!("pseudo-label accuracy on the left half {:.4}", pl_accuracy(&pseudo, &mask, &gt)?.unwrap());
    Ok(())
}
