import numpy as np

DEFAULT_BLOCK_SIZE = 1024


class PathStreams:
    """
    Counter-based random streams for path simulation.

    Paths are dealt in fixed-size blocks. Block ``b`` draws from a Philox
    generator keyed by ``SeedSequence(seed, spawn_key=(b,))`` and always draws
    a full block, so path ``i`` sees the same numbers whatever the total
    number of paths is.
    """

    def __init__(self, seed, block_size=DEFAULT_BLOCK_SIZE):
        """
        Initialize the stream family.

        Args:
            seed (int): Base seed (64-bit)
            block_size (int): Number of paths sharing one substream
        """
        if block_size < 1:
            raise ValueError("block_size must be positive")
        self.seed = int(seed)
        self.block_size = int(block_size)

    def num_blocks(self, n_paths):
        return -(-int(n_paths) // self.block_size)

    def block_rows(self, block, n_paths):
        """Number of requested paths that fall inside the given block."""
        start = block * self.block_size
        return max(0, min(self.block_size, int(n_paths) - start))

    def generator(self, block):
        """
        Generator for one block of paths.

        Args:
            block (int): Block index

        Returns:
            numpy.random.Generator: Fresh generator positioned at the start of the block's stream
        """
        sequence = np.random.SeedSequence(self.seed, spawn_key=(int(block),))
        return np.random.Generator(np.random.Philox(sequence))

    def path_ids(self, n_paths):
        """(block, row) substream identifier of every path."""
        index = np.arange(int(n_paths))
        return np.stack([index // self.block_size, index % self.block_size], axis=1)

    def __str__(self):
        return f"PathStreams(seed={self.seed}, block_size={self.block_size})"
