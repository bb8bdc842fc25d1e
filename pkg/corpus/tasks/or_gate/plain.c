/* Reference plaintext implementation: logical OR of two bits. */
int plain_or(int a, int b) {
    return a || b;
}
