"""genservice: HTTP backend for question/answer generation.

Fine-tunes a generation model per (mode, model_id) on a two-column corpus
export and serves generation requests. The bundled backend is a corpus-
trained retrieval generator, so the whole service runs offline and
deterministically; neural seq2seq backends can plug in behind the same
interface.
"""

__version__ = "0.1.0"
