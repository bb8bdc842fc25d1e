/* Reference plaintext implementation: logical NOT of one bit. */
int plain_not(int a) {
    return !a;
}
