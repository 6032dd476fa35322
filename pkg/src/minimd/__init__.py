"""minimd: a miniature molecular-dynamics engine built to be testable.

The package has three layers:

* the simulation core (``core``, ``neighbor``, ``pair``, ``integrate``,
  ``restartfile``, ``datafile``) working in reduced Lennard-Jones units,
* the command interpreter (``engine``, ``tokenizer``, ``errors``) that turns
  text input decks into simulation calls,
* the verification tooling (``harness``, ``regression``, ``libapi``, ``cli``)
  used to pin numerical behaviour against recorded references.
"""

__version__ = "0.1.0"
