//! Shared dataset fixtures for the integration suite: rasterized digit
//! glyphs standing in for handwritten-digit images, and Gaussian blob
//! datasets for the classification and stability checks.

use ndarray::Array2;
use rvfldl::rng::RandomStream;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// Stroke endpoints `(row, column)` for the ten digit glyphs; each digit
/// is a list of polylines on the 28x28 canvas.
const GLYPH_STROKES: [&[&[(f64, f64)]]; 10] = [
    &[&[
        (6.0, 10.0),
        (5.0, 14.0),
        (6.0, 18.0),
        (14.0, 20.0),
        (22.0, 18.0),
        (23.0, 14.0),
        (22.0, 10.0),
        (14.0, 8.0),
        (6.0, 10.0),
    ]],
    &[
        &[(7.0, 12.0), (5.0, 15.0), (23.0, 15.0)],
        &[(23.0, 10.0), (23.0, 20.0)],
    ],
    &[&[
        (8.0, 9.0),
        (5.0, 14.0),
        (8.0, 19.0),
        (14.0, 16.0),
        (22.0, 8.0),
        (23.0, 20.0),
    ]],
    &[&[
        (6.0, 9.0),
        (5.0, 15.0),
        (10.0, 19.0),
        (14.0, 13.0),
        (18.0, 19.0),
        (23.0, 15.0),
        (22.0, 9.0),
    ]],
    &[
        &[(5.0, 16.0), (15.0, 8.0), (16.0, 20.0)],
        &[(16.0, 6.0), (16.0, 16.0)],
    ],
    &[&[
        (6.0, 19.0),
        (6.0, 9.0),
        (13.0, 9.0),
        (14.0, 18.0),
        (21.0, 18.0),
        (23.0, 12.0),
        (22.0, 9.0),
    ]],
    &[&[
        (5.0, 16.0),
        (12.0, 9.0),
        (21.0, 8.0),
        (23.0, 13.0),
        (19.0, 17.0),
        (13.0, 15.0),
        (12.0, 10.0),
    ]],
    &[&[(6.0, 8.0), (5.0, 20.0), (14.0, 15.0), (23.0, 10.0)]],
    &[
        &[
            (5.0, 14.0),
            (8.0, 10.0),
            (12.0, 13.0),
            (8.0, 18.0),
            (5.0, 14.0),
        ],
        &[
            (12.0, 13.0),
            (17.0, 9.0),
            (23.0, 13.0),
            (19.0, 18.0),
            (12.0, 13.0),
        ],
    ],
    &[
        &[
            (10.0, 17.0),
            (6.0, 12.0),
            (10.0, 8.0),
            (14.0, 12.0),
            (12.0, 17.0),
        ],
        &[(13.0, 17.0), (8.0, 17.0)],
        &[(12.0, 16.0), (23.0, 13.0)],
    ],
];

/// Pen width of the rendered strokes, as the Gaussian falloff sigma.
const STROKE_SIGMA: f64 = 1.3;

/// Renders one digit glyph, shifted by whole pixels, as a noise-free
/// 28x28 intensity image in `[0, 255]` stored row-major.
fn raster_glyph(digit: usize, shift_row: f64, shift_col: f64) -> [f64; IMAGE_PIXELS] {
    let mut img = [0.0_f64; IMAGE_PIXELS];
    for stroke in GLYPH_STROKES[digit] {
        for pair in stroke.windows(2) {
            let (r0, c0) = (pair[0].0 + shift_row, pair[0].1 + shift_col);
            let (r1, c1) = (pair[1].0 + shift_row, pair[1].1 + shift_col);
            let (vr, vc) = (r1 - r0, c1 - c0);
            let len2 = vr * vr + vc * vc;
            for y in 0..IMAGE_SIDE {
                for x in 0..IMAGE_SIDE {
                    let (py, px) = (y as f64, x as f64);
                    let t = if len2 == 0.0 {
                        0.0
                    } else {
                        (((py - r0) * vr + (px - c0) * vc) / len2).clamp(0.0, 1.0)
                    };
                    let dr = py - (r0 + t * vr);
                    let dc = px - (c0 + t * vc);
                    let d2 = dr * dr + dc * dc;
                    let value = 255.0 * (-d2 / (2.0 * STROKE_SIGMA * STROKE_SIGMA)).exp();
                    let cell = &mut img[y * IMAGE_SIDE + x];
                    if value > *cell {
                        *cell = value;
                    }
                }
            }
        }
    }
    img
}

/// Synthetic digit dataset: `count` images as 784-row columns with labels
/// cycling through the ten digits. Every image gets an integer shift in
/// `[-2, 2]` per axis, an amplitude in `[0.8, 1.0]`, and additive Gaussian
/// pixel noise, then is clipped back into `[0, 255]`.
pub fn glyph_dataset(
    count: usize,
    noise_std: f64,
    stream: &mut RandomStream,
) -> (Array2<f64>, Vec<usize>) {
    let mut data = Array2::zeros((IMAGE_PIXELS, count));
    let mut labels = Vec::with_capacity(count);
    for j in 0..count {
        let digit = j % 10;
        let shift_row = (stream.next_f64() * 5.0).floor() - 2.0;
        let shift_col = (stream.next_f64() * 5.0).floor() - 2.0;
        let amp = 0.8 + 0.2 * stream.next_f64();
        let img = raster_glyph(digit, shift_row, shift_col);
        let noise = stream.standard_normals(IMAGE_PIXELS);
        for (i, (&v, &z)) in img.iter().zip(noise.iter()).enumerate() {
            data[[i, j]] = (amp * v + noise_std * z).clamp(0.0, 255.0);
        }
        labels.push(digit);
    }
    (data, labels)
}

/// Two Gaussian blobs in `dimension` dimensions: class 0 centered at
/// `+center` in every coordinate, class 1 at `-center`, labels
/// alternating by column.
pub fn blob_dataset(
    count: usize,
    dimension: usize,
    center: f64,
    spread: f64,
    stream: &mut RandomStream,
) -> (Array2<f64>, Vec<usize>) {
    let mut data = Array2::zeros((dimension, count));
    let mut labels = Vec::with_capacity(count);
    for j in 0..count {
        let class = j % 2;
        let mean = if class == 0 { center } else { -center };
        let noise = stream.standard_normals(dimension);
        for (i, &z) in noise.iter().enumerate() {
            data[[i, j]] = mean + spread * z;
        }
        labels.push(class);
    }
    (data, labels)
}

/// Extracts column `j` of a pixel matrix as a 28x28 row-major image.
pub fn column_as_image(data: &Array2<f64>, j: usize) -> Array2<f64> {
    let col: Vec<f64> = data.column(j).to_vec();
    Array2::from_shape_vec((IMAGE_SIDE, IMAGE_SIDE), col)
        .expect("a pixel column has exactly IMAGE_PIXELS entries")
}
