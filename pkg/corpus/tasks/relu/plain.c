/* Reference plaintext implementation: ReLU over a signed 8-bit value. */
int plain_relu(int x) {
    return x > 0 ? x : 0;
}
