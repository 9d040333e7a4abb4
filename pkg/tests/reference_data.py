"""Field measurements used as regression fixtures."""

# Per-frame video and LiDAR localization of one vehicle:
# (frame, video distance m, video bearing deg, lidar distance m, lidar bearing deg)
TRACK_PAIR = [
    (1, 60.59, 275.87, 60.61, 273.30),
    (2, 60.50, 275.31, 60.34, 272.96),
    (3, 60.19, 274.79, 60.10, 272.57),
    (4, 60.02, 274.35, 59.70, 272.06),
    (5, 59.76, 273.80, 59.27, 271.63),
    (6, 59.28, 273.13, 58.89, 271.11),
    (7, 59.07, 272.54, 58.71, 270.68),
    (8, 58.84, 271.84, 58.39, 270.15),
    (9, 58.36, 271.41, 58.10, 269.69),
    (10, 58.07, 270.89, 57.68, 269.16),
    (11, 57.61, 270.33, 57.38, 268.70),
    (12, 57.32, 269.80, 56.83, 268.15),
    (13, 57.29, 269.42, 56.41, 267.68),
    (14, 56.66, 268.62, 56.01, 267.11),
    (15, 55.94, 267.68, 55.65, 266.63),
    (16, 55.62, 267.25, 55.26, 266.06),
    (17, 55.48, 266.77, 54.90, 265.57),
    (18, 55.18, 266.40, 54.47, 264.99),
    (19, 54.48, 265.59, 54.16, 264.51),
    (20, 54.09, 264.96, 53.61, 263.92),
    (21, 53.57, 264.46, 53.19, 263.42),
    (22, 53.31, 263.98, 52.72, 262.82),
    (23, 52.66, 263.18, 52.19, 262.32),
    (24, 52.10, 262.68, 51.60, 261.72),
    (25, 51.62, 261.90, 51.16, 261.21),
]

# Weight matrix between video ids (rows) and LiDAR ids (columns).
WEIGHT_ROWS = [1, 6, 12]
WEIGHT_COLS = [9, 42, 84]
WEIGHTS = [
    [31.68642907, 27.60446205, 17.84351904],
    [19.32752349, 17.20332513, 13.44238212],
    [25.31265037, 21.23068335, 11.46974034],
]
MARKED_PAIRING = {(1, 84), (6, 9), (12, 42)}

# Optimized parameters of the reference camera (4K sensor).
REFERENCE_CAMERA = {"focal_px": 3362.7385, "height_m": 9.3041, "pitch_deg": 8.6503,
                    "heading_deg": 275.6085}
