/* Reference plaintext implementation: logical AND of two bits. */
int plain_and(int a, int b) {
    return a && b;
}
