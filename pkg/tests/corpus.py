"""Curated sentences with hand-derived topic labels for the bundled taxonomies."""

G, H, I, He = "haze-general", "haze-hashtag", "haze-impact", "haze-health"

CORPUS = [
    ("When the haze problem will be solved?", {G}),
    ("Let's participate in #melawanasap movement.", {H}),
    ("Day #3 off because of Haze.", {G}),
    ("Welcome to Pekanbaru; do not forget to wear mask!", set()),
    ("selamat pagi", set()),
    ("ayo #SaveRiau sekarang", {H}),
    ("#prayforriau jangan lupa pakai masker", {H, He}),
    ("kabut asap makin tebal hari ini", {G}),
    ("asap kabut", {G}),
    ("asap di kota", set()),
    ("penerbangan dibatalkan karena asap", {I}),
    ("bandara ditutup", {I}),
    ("jarak pandang hanya 100 meter", {I}),
    ("jarak sangat pandang", set()),
    ("sekolah diliburkan karena kabut asap", {G, I}),
    ("dampak asap bagi ekonomi riau", {I}),
    ("batuk dan sesak napas", {He}),
    ("radang tenggorokan", set()),
    ("radang enggorokan", {He}),
    ("mata pedih kena asap", {He}),
    ("ibu hamil harus hindari asap", {He}),
    ("asap berbahaya untuk kesehatan anak", {G, He}),
    ("kebakaran hutan di riau", {G}),
    ("kebakaran lahan gambut", {G}),
    ("forest fire in sumatra", {G}),
    ("fire forest", set()),
    ("titik api bertambah", {G}),
    ("polusi udara parah", {G}),
    ("paru-paru saya sakit", {He}),
    ("paru paru", set()),
    ("ISPA meningkat di pekanbaru", {He}),
    ("tutup penerbangan dan sekolah libur, dampak kabut", {G, I}),
    ("badai asap melanda", {G}),
    ("infeksi saluran pernafasan akut", {He}),
    ("orang tua dan asap", {He}),
    ("tua orang asap", set()),
    ("#prayforasap #hentikanasap", {H}),
    ("saveriau tanpa tagar", set()),
    ("Kabut Asap + #SaveRiau + masker + jarak pandang", {G, H, I, He}),
    ("delay di bandara", {I}),
]
