int scale(int x) {
    return 2 * x;
}

int shift(int x) {
    int y = scale(x)
    return y + 1;
}
